import numpy as np
from rest_framework import serializers

from .models import SimplexLp


# ----------------------------
# Constraint row (a | b)
# ----------------------------
class ConstraintRowSerializer(serializers.Serializer):
    lhs = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    rhs = serializers.FloatField()


# ----------------------------
# LP instance
# ----------------------------
class SimplexLpSerializer(serializers.Serializer):
    name = serializers.CharField(required=False, allow_blank=True, default="")
    ground_set = serializers.IntegerField(min_value=1)
    cost = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    constraints = ConstraintRowSerializer(many=True, default=list)

    def validate(self, attrs):
        n = attrs["ground_set"]
        if len(attrs["cost"]) != n:
            raise serializers.ValidationError({"cost": f"expected {n} entries, got {len(attrs['cost'])}"})
        for index, row in enumerate(attrs["constraints"]):
            if len(row["lhs"]) != n:
                raise serializers.ValidationError(
                    {"constraints": f"row {index} has {len(row['lhs'])} coefficients, expected {n}"}
                )
        return attrs

    def create(self, validated_data):
        n = validated_data["ground_set"]
        rows = validated_data["constraints"]
        lhs = np.array([row["lhs"] for row in rows], dtype=float).reshape(len(rows), n)
        rhs = np.array([row["rhs"] for row in rows], dtype=float)
        return SimplexLp(validated_data["cost"], lhs, rhs, name=validated_data["name"])
