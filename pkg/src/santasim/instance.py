"""Gift-allocation problem instances and their text format.

An instance is a bipartite desire graph between children 0..n_children-1
and gifts 0..len(values)-1 with nonnegative rational gift values.  The text
format is line based:

    santa <|C|> <|G|>
    gift <id> <value>
    edge <child_id> <gift_id>
    frac <child> <gift> <num>/<den>     (optional fractional solution)

Assignments are emitted as "gift_id child_id" lines.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from .util import format_value, parse_value


@dataclass
class Instance:
    num_children: int
    values: list                     # Fraction per gift id
    edges: set                       # (child, gift) pairs
    labels: dict = field(default_factory=dict)   # optional debug names

    def __post_init__(self):
        self.values = [Fraction(v) for v in self.values]
        for v in self.values:
            if v < 0:
                raise ValueError("gift values must be nonnegative")
        self.edges = {(int(c), int(g)) for c, g in self.edges}
        for c, g in self.edges:
            if not (0 <= c < self.num_children and 0 <= g < len(self.values)):
                raise ValueError(f"edge ({c},{g}) out of range")

    @property
    def num_gifts(self):
        return len(self.values)

    def children(self):
        return range(self.num_children)

    def gifts(self):
        return range(self.num_gifts)

    def gifts_of(self, c):
        return sorted(g for cc, g in self.edges if cc == c)

    def children_of(self, g):
        return sorted(c for c, gg in self.edges if gg == g)

    def total_value(self):
        return sum(self.values, Fraction(0))

    def gift_node(self, g):
        """Node id of gift g in the communication graph."""
        return self.num_children + g

    def network_edges(self):
        return sorted((c, self.gift_node(g)) for c, g in self.edges)

    def network_nodes(self):
        return list(range(self.num_children + self.num_gifts))


def format_instance(inst: Instance, frac=None) -> str:
    lines = [f"santa {inst.num_children} {inst.num_gifts}"]
    for g in inst.gifts():
        lines.append(f"gift {g} {format_value(inst.values[g])}")
    for c, g in sorted(inst.edges):
        lines.append(f"edge {c} {g}")
    if frac:
        for (c, g), v in sorted(frac.items()):
            f = Fraction(v).limit_denominator(10 ** 12)
            lines.append(f"frac {c} {g} {f.numerator}/{f.denominator}")
    return "\n".join(lines) + "\n"


def parse_instance(text: str):
    """Returns (Instance, fractional solution dict or None)."""
    header = None
    values = {}
    edges = set()
    frac = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "santa":
                header = (int(tok[1]), int(tok[2]))
            elif tok[0] == "gift":
                values[int(tok[1])] = parse_value(tok[2])
            elif tok[0] == "edge":
                edges.add((int(tok[1]), int(tok[2])))
            elif tok[0] == "frac":
                frac[(int(tok[1]), int(tok[2]))] = parse_value(tok[3])
            else:
                raise ValueError(f"unknown record {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if header is None:
        raise ValueError("missing santa header")
    n_c, n_g = header
    vals = [values.get(g, Fraction(0)) for g in range(n_g)]
    inst = Instance(n_c, vals, edges)
    return inst, (frac if frac else None)


def format_assignment(assignment: dict) -> str:
    lines = [f"{g} {c}" for g, c in sorted(assignment.items()) if c is not None]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_assignment(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) != 2:
            raise ValueError(f"line {lineno}: expected 'gift child'")
        g, c = int(tok[0]), int(tok[1])
        if g in out:
            raise ValueError(f"line {lineno}: gift {g} assigned twice")
        out[g] = c
    return out
