from django.apps import AppConfig


class AlignappConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'alignapp'
    verbose_name = 'Skill-gap diagnosis pipeline'

    def ready(self):
        import alignapp.signals  # noqa: F401
