from rest_framework import serializers

from lp_geometry.catalog import improvement_example

from .models import ExperimentManifest

RECIPES = {
    "ex35": improvement_example,
}


# ----------------------------
# Recorded manifest
# ----------------------------
class ExperimentManifestSerializer(serializers.ModelSerializer):
    class Meta:
        model = ExperimentManifest
        fields = [
            "id", "command", "instance_path", "overrides",
            "output_dir", "seeds", "tool_version", "created_at",
        ]
        read_only_fields = ["id", "created_at"]


# ----------------------------
# Parametric instance recipe
# ----------------------------
class RecipeSerializer(serializers.Serializer):
    name = serializers.CharField(required=False, allow_blank=True, default="")
    recipe = serializers.ChoiceField(choices=sorted(RECIPES))
    alpha = serializers.FloatField()

    def validate_alpha(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("alpha must lie strictly between 0 and 1")
        return value

    def create(self, validated_data):
        return RECIPES[validated_data["recipe"]](validated_data["alpha"])
