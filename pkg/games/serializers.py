from rest_framework import serializers

from .factorization import check_joint_size, factorize_cost


# ----------------------------
# Game payoff
# ----------------------------
class GameSerializer(serializers.Serializer):
    """Cost entries are listed player-major: the first player's action varies slowest."""

    name = serializers.CharField(required=False, allow_blank=True, default="")
    num_players = serializers.IntegerField(min_value=1)
    num_actions = serializers.IntegerField(min_value=1)
    cost = serializers.ListField(child=serializers.FloatField(), allow_empty=False)

    def validate(self, attrs):
        n, k = attrs["num_players"], attrs["num_actions"]
        size = check_joint_size(n, k)
        if len(attrs["cost"]) != size:
            raise serializers.ValidationError({"cost": f"expected {size} entries, got {len(attrs['cost'])}"})
        return attrs

    def create(self, validated_data):
        return factorize_cost(validated_data["cost"], validated_data["num_players"], validated_data["num_actions"])
