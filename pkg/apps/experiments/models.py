"""Experiment models - one row per training run."""
from django.db import models
from apps.core.models import BaseModel


class ExperimentRun(BaseModel):
    """Tracks a training run and keeps its final report."""

    class Status(models.TextChoices):
        QUEUED = 'queued', 'Queued'
        RUNNING = 'running', 'Running'
        COMPLETED = 'completed', 'Completed'
        FAILED = 'failed', 'Failed'

    name = models.CharField(max_length=100)
    kind = models.CharField(max_length=20)
    seed = models.PositiveIntegerField(default=0)
    status = models.CharField(
        max_length=20,
        choices=Status.choices,
        default=Status.QUEUED
    )
    config = models.JSONField(default=dict, blank=True)
    report = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    error_message = models.TextField(blank=True)

    started_at = models.DateTimeField(null=True, blank=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        verbose_name = 'Experiment Run'
        verbose_name_plural = 'Experiment Runs'
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name} seed {self.seed} ({self.get_status_display()})"

    @property
    def test_mse(self):
        return self.report.get('test_mse')
