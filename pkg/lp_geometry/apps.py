from django.apps import AppConfig


class LpGeometryConfig(AppConfig):
    name = "lp_geometry"
    verbose_name = "Linear programs over the simplex"
