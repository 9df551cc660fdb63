from django.apps import AppConfig


class GridworldAppConfig(AppConfig):
    name = 'gridworld_app'
    verbose_name = 'Gridworld experiment'
