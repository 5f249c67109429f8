"""
URL configuration for the diffprog project.

Only the admin is served; it lists experiment runs.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
