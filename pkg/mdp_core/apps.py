from django.apps import AppConfig


class MdpCoreConfig(AppConfig):
    name = "mdp_core"
    verbose_name = "Finite discounted MDPs"
