from django.contrib import admin
from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('name', 'kind', 'seed', 'status', 'test_mse', 'created_at')
    list_filter = ('status', 'kind')
    search_fields = ('name', 'output_dir')
    readonly_fields = ('config', 'report')
