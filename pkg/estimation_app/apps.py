from django.apps import AppConfig


class EstimationAppConfig(AppConfig):
    name = 'estimation_app'
    verbose_name = 'Posterior estimation'
