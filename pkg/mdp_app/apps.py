from django.apps import AppConfig


class MdpAppConfig(AppConfig):
    name = 'mdp_app'
    verbose_name = 'Tabular MDP core'
