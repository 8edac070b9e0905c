from django.db import models


# ==========================
# EXPERIMENT MANIFEST
# ==========================
class ExperimentManifest(models.Model):
    """Everything needed to re-run a command and get the same CSV bytes back."""

    COMMAND_CHOICES = (
        ("rates", "Rate constants"),
        ("flow", "Fisher-Rao flow"),
        ("repro", "NPG reproduction"),
        ("game", "Multi-player game flow"),
    )

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    # instance file for rates/flow/game, figure id for repro
    instance_path = models.CharField(max_length=500)
    overrides = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500)
    seeds = models.JSONField(default=list, blank=True)
    tool_version = models.CharField(max_length=20)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-id"]

    def __str__(self):
        return f"{self.command} {self.instance_path} -> {self.output_dir}"
