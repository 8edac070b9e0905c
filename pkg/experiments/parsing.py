"""Line-oriented instance files.

One statement per line: a keyword followed by whitespace-separated values.
Blank lines and anything after ``#`` are ignored. The first statement is
``kind``, which selects the keywords allowed afterwards::

    kind lp       name TEXT | atoms N | cost C1 .. CN
                  constraint A1 .. AN = B        (repeatable)
    kind mdp      name TEXT | states S | actions A | gamma G | mu M1 .. MS
                  reward R1 .. RA                (one line per state)
                  transition P1 .. PS            (one line per (s, a), a fastest)
    kind game     name TEXT | players N | actions K
                  cost ...                       (repeatable, first player slowest)
    kind recipe   name TEXT | recipe ex35 | alpha A

Errors carry 1-based line and column numbers.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from rest_framework import serializers

from frflow.exceptions import InstanceParseError
from games.serializers import GameSerializer
from lp_geometry.serializers import SimplexLpSerializer
from mdp_core.serializers import MdpSerializer

from .serializers import RecipeSerializer

logger = logging.getLogger(__name__)

BUNDLED_DIR = Path(__file__).resolve().parent / "instances"

LP = "lp"
MDP = "mdp"
GAME = "game"
RECIPE = "recipe"

# keyword -> (payload field, value shape)
KEYWORDS = {
    LP: {
        "name": ("name", "text"),
        "atoms": ("ground_set", "int"),
        "cost": ("cost", "row"),
        "constraint": ("constraints", "constraint"),
    },
    MDP: {
        "name": ("name", "text"),
        "states": ("num_states", "int"),
        "actions": ("num_actions", "int"),
        "gamma": ("gamma", "float"),
        "mu": ("mu", "row"),
        "reward": ("reward", "rows"),
        "transition": ("transition", "rows"),
    },
    GAME: {
        "name": ("name", "text"),
        "players": ("num_players", "int"),
        "actions": ("num_actions", "int"),
        "cost": ("cost", "concat"),
    },
    RECIPE: {
        "name": ("name", "text"),
        "recipe": ("recipe", "text"),
        "alpha": ("alpha", "float"),
    },
}

SERIALIZERS = {
    LP: SimplexLpSerializer,
    MDP: MdpSerializer,
    GAME: GameSerializer,
    RECIPE: RecipeSerializer,
}

REPEATABLE = {"rows", "concat", "constraint"}


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int

    @property
    def end(self):
        return self.column + len(self.text)


@dataclass(frozen=True, eq=False)
class Instance:
    """A parsed instance: ``program`` is a ``SimplexLp``, an ``Mdp`` or a ``FactorizedCost``."""

    kind: str
    name: str
    program: object
    source: str = ""

    @property
    def is_program(self):
        return self.kind in (LP, MDP, RECIPE)


def tokenize(text):
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0]
        tokens, cursor = [], 0
        for piece in content.split():
            cursor = content.index(piece, cursor)
            tokens.append(Token(piece, number, cursor + 1))
            cursor += len(piece)
        if tokens:
            yield tokens


# ==========================
# VALUES
# ==========================
def _float(token):
    try:
        value = float(token.text)
    except ValueError:
        raise InstanceParseError(f"expected a number, got {token.text!r}", token.line, token.column) from None
    if not np.isfinite(value):
        raise InstanceParseError(f"non-finite number {token.text!r}", token.line, token.column)
    return value


def _int(token):
    try:
        return int(token.text)
    except ValueError:
        raise InstanceParseError(f"expected an integer, got {token.text!r}", token.line, token.column) from None


def _single(head, values):
    if len(values) != 1:
        where = values[1] if len(values) > 1 else None
        line, column = (where.line, where.column) if where else (head.line, head.end)
        raise InstanceParseError(f"'{head.text}' takes exactly one value, got {len(values)}", line, column)
    return values[0]


def _constraint(head, values):
    texts = [token.text for token in values]
    if "=" not in texts:
        raise InstanceParseError("constraint row needs '= RHS'", head.line, (values[-1] if values else head).end)
    split = texts.index("=")
    rhs = values[split + 1:]
    if len(rhs) != 1:
        where = rhs[1] if len(rhs) > 1 else values[split]
        raise InstanceParseError("constraint row needs exactly one right-hand side", where.line, where.column)
    return {"lhs": [_float(token) for token in values[:split]], "rhs": _float(rhs[0])}


def _first_error(detail):
    field, errors = next(iter(detail.items()))
    while isinstance(errors, (dict, list)):
        errors = next(iter(errors.values())) if isinstance(errors, dict) else errors[0]
    return field, str(errors)


# ==========================
# PARSER
# ==========================
def parse_instance(text, source="", overrides=None):
    statements = list(tokenize(text))
    if not statements:
        raise InstanceParseError("empty instance", line=1, column=1)

    head, *values = statements[0]
    if head.text != "kind":
        raise InstanceParseError(f"expected 'kind' first, got {head.text!r}", head.line, head.column)
    kind_token = _single(head, values)
    kind = kind_token.text
    if kind not in KEYWORDS:
        raise InstanceParseError(
            f"unknown kind {kind!r}; expected one of {sorted(KEYWORDS)}", kind_token.line, kind_token.column
        )
    schema = KEYWORDS[kind]

    payload, first_line = {}, {}
    for head, *values in statements[1:]:
        if head.text not in schema:
            raise InstanceParseError(f"unknown keyword {head.text!r} in a {kind} instance", head.line, head.column)
        field, shape = schema[head.text]
        if field in payload and shape not in REPEATABLE:
            raise InstanceParseError(f"'{head.text}' given twice", head.line, head.column)
        first_line.setdefault(field, head.line)

        if shape == "text":
            payload[field] = " ".join(token.text for token in values)
        elif shape == "int":
            payload[field] = _int(_single(head, values))
        elif shape == "float":
            payload[field] = _float(_single(head, values))
        elif shape == "row":
            payload[field] = [_float(token) for token in values]
        elif shape == "rows":
            payload.setdefault(field, []).append([_float(token) for token in values])
        elif shape == "concat":
            payload.setdefault(field, []).extend(_float(token) for token in values)
        else:
            payload.setdefault(field, []).append(_constraint(head, values))

    known = {field for field, _ in schema.values()}
    for key, value in (overrides or {}).items():
        if key not in known:
            raise InstanceParseError(f"'{key}' does not apply to a {kind} instance")
        payload[key] = value

    serializer = SERIALIZERS[kind](data=payload)
    try:
        serializer.is_valid(raise_exception=True)
    except serializers.ValidationError as exc:
        field, message = _first_error(exc.detail)
        keyword = next((kw for kw, (name, _) in schema.items() if name == field), field)
        line = first_line.get(field)
        raise InstanceParseError(f"{keyword}: {message}", line=line, column=1 if line else None) from exc

    program = serializer.save()
    name = payload.get("name") or getattr(program, "name", "") or Path(source).stem
    return Instance(kind=kind, name=name, program=program, source=source)


def resolve_instance_path(path):
    """An existing file, or the bundled instance with the same stem."""
    candidate = Path(path)
    if candidate.is_file():
        return candidate
    bundled = BUNDLED_DIR / f"{candidate.stem}.txt"
    if bundled.is_file():
        return bundled
    raise InstanceParseError(f"no instance file at {path} and no bundled instance named {candidate.stem!r}")


def load_instance(path, overrides=None):
    resolved = resolve_instance_path(path)
    try:
        text = resolved.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise InstanceParseError(f"{resolved} is not UTF-8 text") from exc
    instance = parse_instance(text, source=str(resolved), overrides=overrides)
    logger.info("loaded %s instance %r from %s", instance.kind, instance.name, resolved)
    return instance


def load_features(path, num_states, num_actions):
    """Log-linear features: ``S * A`` rows (``a`` fastest) of ``p`` columns."""
    try:
        table = np.loadtxt(path, ndmin=2, comments="#")
    except (OSError, ValueError) as exc:
        raise InstanceParseError(f"cannot read features from {path}: {exc}") from exc
    if table.shape[0] != num_states * num_actions:
        raise InstanceParseError(
            f"{path}: expected {num_states * num_actions} feature rows, got {table.shape[0]}"
        )
    return table.reshape(num_states, num_actions, -1)
