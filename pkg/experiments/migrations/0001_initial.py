# Generated by Django 6.0 on 2026-10-17 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('rates', 'Rate constants'), ('flow', 'Fisher-Rao flow'), ('repro', 'NPG reproduction'), ('game', 'Multi-player game flow')], max_length=20)),
                ('instance_path', models.CharField(max_length=500)),
                ('overrides', models.JSONField(blank=True, default=dict)),
                ('output_dir', models.CharField(max_length=500)),
                ('seeds', models.JSONField(blank=True, default=list)),
                ('tool_version', models.CharField(max_length=20)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-id'],
            },
        ),
    ]
