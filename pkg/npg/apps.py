from django.apps import AppConfig


class NaturalGradientConfig(AppConfig):
    name = "npg"
    verbose_name = "Natural policy gradients"
