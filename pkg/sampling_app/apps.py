from django.apps import AppConfig


class SamplingAppConfig(AppConfig):
    name = 'sampling_app'
    verbose_name = 'Monte-Carlo rollouts and estimators'
