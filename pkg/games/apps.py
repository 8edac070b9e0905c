from django.apps import AppConfig


class GamesConfig(AppConfig):
    name = "games"
    verbose_name = "Independence models of multi-player games"
