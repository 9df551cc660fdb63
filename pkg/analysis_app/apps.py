from django.apps import AppConfig


class AnalysisAppConfig(AppConfig):
    name = 'analysis_app'
    verbose_name = 'Bound and identity certification'
