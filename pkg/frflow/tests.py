import os

from django.conf import settings
from django.test import SimpleTestCase, override_settings

from .conf import DEFAULTS, frflow_setting


class FrflowSettingTests(SimpleTestCase):
    @override_settings(FRFLOW={})
    def test_threads_default_to_the_cpu_count(self):
        self.assertEqual(frflow_setting("THREADS"), os.cpu_count() or 1)

    @override_settings(FRFLOW={"THREADS": 3})
    def test_project_settings_override_defaults(self):
        self.assertEqual(frflow_setting("THREADS"), 3)
        self.assertEqual(frflow_setting("NPG_ITERS"), DEFAULTS["NPG_ITERS"])

    def test_environment_overrides_name_known_settings(self):
        self.assertLessEqual(set(settings.FRFLOW_ENVIRONMENT), set(DEFAULTS))
        self.assertLessEqual(set(settings.FRFLOW), set(DEFAULTS))
