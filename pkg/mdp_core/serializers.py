import numpy as np
from rest_framework import serializers

from measures.models import Distribution

from .models import Mdp


def _row():
    return serializers.ListField(child=serializers.FloatField(), allow_empty=False)


# ----------------------------
# MDP instance
# ----------------------------
class MdpSerializer(serializers.Serializer):
    """Tables in state-major order: ``reward`` has one row per state and
    ``transition`` one row per ``(s, a)`` pair, ``a`` varying fastest."""

    name = serializers.CharField(required=False, allow_blank=True, default="")
    num_states = serializers.IntegerField(min_value=1)
    num_actions = serializers.IntegerField(min_value=1)
    gamma = serializers.FloatField(min_value=0.0)
    mu = serializers.ListField(child=serializers.FloatField(min_value=0.0), allow_empty=False)
    reward = serializers.ListField(child=_row(), allow_empty=False)
    transition = serializers.ListField(child=_row(), allow_empty=False)

    def validate_gamma(self, value):
        if value >= 1.0:
            raise serializers.ValidationError("discount must be below 1")
        return value

    def validate(self, attrs):
        S, A = attrs["num_states"], attrs["num_actions"]
        errors = {}
        if len(attrs["mu"]) != S:
            errors["mu"] = f"expected {S} entries, got {len(attrs['mu'])}"
        if len(attrs["reward"]) != S or any(len(row) != A for row in attrs["reward"]):
            errors["reward"] = f"expected {S} rows of {A} entries"
        if len(attrs["transition"]) != S * A or any(len(row) != S for row in attrs["transition"]):
            errors["transition"] = f"expected {S * A} rows of {S} entries"
        if errors:
            raise serializers.ValidationError(errors)
        return attrs

    def create(self, validated_data):
        S, A = validated_data["num_states"], validated_data["num_actions"]
        transition = np.array(validated_data["transition"], dtype=float).reshape(S, A, S)
        return Mdp(
            transition,
            np.array(validated_data["reward"], dtype=float),
            validated_data["gamma"],
            Distribution(validated_data["mu"]),
            name=validated_data["name"],
        )
