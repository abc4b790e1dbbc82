"""Circuit model and a small SPICE-flavoured netlist reader/writer.

Grammar (one statement per line, ``*`` starts a comment line)::

    netlist   = { line } ;
    line      = comment | directive | element | coupling | blank ;
    directive = ".title" text | ".end" ;
    element   = NAME node node [ "CTRL" control { control } ] model ;
    coupling  = KNAME inductor inductor number ;
    control   = "V" "(" ID ")"             (* branch voltage, or node vs ground *)
              | "V" "(" node "," node ")"  (* node pair voltage *)
              | "I" "(" ID ")" ;           (* inductor or controlled V-source current *)
    model     = number | "DC" number | FUNC "(" number { [","] number } ")" ;

The first letter of ``NAME`` selects the element: ``R C L V I`` as usual,
``E`` (controlled voltage source) and ``G`` (controlled current source).
``V``/``I`` lines carrying a ``CTRL`` clause are controlled sources.  The
ground node is the literal ``0``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from . import devices as dev
from .errors import (
    DanglingNode,
    DisconnectedCircuit,
    DuplicateElementId,
    InvalidControl,
    InvalidParameter,
    NetlistSyntaxError,
    SelfLoop,
    UnknownModel,
)

GROUND = "0"


class Kind(str, enum.Enum):
    C = "C"
    L = "L"
    R = "R"
    VS = "Vs"
    VC = "Vc"
    IS = "Is"
    IC = "Ic"

    def __str__(self):
        return self.value


KIND_ORDER = (Kind.C, Kind.L, Kind.R, Kind.VS, Kind.VC, Kind.IS, Kind.IC)
_KIND_RANK = {k: i for i, k in enumerate(KIND_ORDER)}

_KIND_ALIASES = {
    "C": (Kind.C,),
    "L": (Kind.L,),
    "R": (Kind.R,),
    "VS": (Kind.VS,),
    "VC": (Kind.VC,),
    "IS": (Kind.IS,),
    "IC": (Kind.IC,),
    "V": (Kind.VS, Kind.VC),
    "I": (Kind.IS, Kind.IC),
}


def as_kinds(kinds) -> frozenset:
    """Normalise a kind filter (``None`` = all kinds, strings or Kind members)."""
    if kinds is None:
        return frozenset(KIND_ORDER)
    if isinstance(kinds, (str, Kind)):
        kinds = [kinds]
    out = set()
    for k in kinds:
        if isinstance(k, Kind):
            out.add(k)
        else:
            try:
                out.update(_KIND_ALIASES[str(k).upper()])
            except KeyError:
                raise ValueError(f"unknown element kind {k!r}") from None
    return frozenset(out)


class ControlKind(str, enum.Enum):
    BRANCH_VOLTAGE = "branch_voltage"
    NODE_PAIR_VOLTAGE = "node_pair_voltage"
    INDUCTOR_CURRENT = "inductor_current"
    VC_CURRENT = "vc_current"


@dataclass(frozen=True)
class ControlRef:
    kind: ControlKind
    element: str | None = None
    nodes: tuple | None = None

    @property
    def is_voltage(self):
        return self.kind in (ControlKind.BRANCH_VOLTAGE, ControlKind.NODE_PAIR_VOLTAGE)

    def describe(self, circuit):
        if self.kind is ControlKind.NODE_PAIR_VOLTAGE:
            a, b = self.nodes
            return f"V({circuit.nodes[a]},{circuit.nodes[b]})"
        if self.kind is ControlKind.BRANCH_VOLTAGE:
            return f"V({self.element})"
        return f"I({self.element})"


@dataclass(frozen=True)
class Element:
    id: str
    kind: Kind
    from_node: int
    to_node: int
    behavior: object
    controls: tuple = ()

    @property
    def controlled(self):
        return bool(self.controls)


@dataclass(frozen=True)
class Coupling:
    id: str
    first: str
    second: str
    k: float


@dataclass(frozen=True)
class Circuit:
    """Validated node/branch model; node 0 is ground."""

    nodes: tuple
    branches: tuple
    name: str = ""
    couplings: tuple = ()
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        _validate(self)
        object.__setattr__(self, "_index", {e.id: i for i, e in enumerate(self.branches)})

    def __hash__(self):
        return hash((self.nodes, self.branches, self.name, self.couplings))

    @property
    def num_nodes(self):
        return len(self.nodes)

    def index_of(self, element_id):
        return self._index[element_id]

    def element(self, element_id):
        return self.branches[self._index[element_id]]

    def has_element(self, element_id):
        return element_id in self._index

    def of_kind(self, kinds):
        """Branch indices of the given kinds, in canonical incidence order."""
        ks = as_kinds(kinds)
        return [i for i in kind_sorted_incidence_order(self) if self.branches[i].kind in ks]


def _validate(c: Circuit):
    if not c.nodes or c.nodes[0] != GROUND:
        raise DisconnectedCircuit("node 0 must be the ground node '0'")
    if len(set(c.nodes)) != len(c.nodes):
        raise DuplicateElementId("duplicate node identifiers")
    n = len(c.nodes)
    seen = set()
    for e in c.branches:
        if e.id in seen:
            raise DuplicateElementId(f"duplicate element id {e.id!r}")
        seen.add(e.id)
        if not (0 <= e.from_node < n and 0 <= e.to_node < n):
            raise DanglingNode(f"element {e.id} references an unknown node")
        if e.from_node == e.to_node:
            raise SelfLoop(f"element {e.id} connects node {c.nodes[e.from_node]!r} to itself")
        if e.kind in (Kind.VS, Kind.IS) and e.controls:
            raise InvalidControl(f"independent source {e.id} cannot have controls")
    kinds = {e.id: e.kind for e in c.branches}
    for e in c.branches:
        for ref in e.controls:
            _validate_control(c, e, ref, kinds)
    for k in c.couplings:
        for lid in (k.first, k.second):
            if kinds.get(lid) is not Kind.L:
                raise InvalidControl(f"coupling {k.id} references {lid!r}, not an inductor")
        if not (0 < abs(k.k) < 1):
            raise InvalidParameter(f"coupling {k.id} needs 0 < |k| < 1")
    used = {0}
    for e in c.branches:
        used.add(e.from_node)
        used.add(e.to_node)
    if len(used) != n:
        missing = [c.nodes[i] for i in range(n) if i not in used]
        raise DanglingNode(f"nodes {missing} are not on any branch")
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in c.branches:
        parent[find(e.from_node)] = find(e.to_node)
    roots = {find(i) for i in range(n)}
    if len(roots) > 1:
        raise DisconnectedCircuit(f"circuit graph has {len(roots)} connected components")


def _validate_control(c, e, ref, kinds):
    if ref.kind is ControlKind.NODE_PAIR_VOLTAGE:
        a, b = ref.nodes
        if not (0 <= a < len(c.nodes) and 0 <= b < len(c.nodes)):
            raise DanglingNode(f"control of {e.id} references an unknown node")
        return
    target = kinds.get(ref.element)
    if target is None:
        raise InvalidControl(f"control of {e.id} references unknown element {ref.element!r}")
    if ref.kind is ControlKind.INDUCTOR_CURRENT and target is not Kind.L:
        raise InvalidControl(f"I({ref.element}) in {e.id}: not an inductor")
    if ref.kind is ControlKind.VC_CURRENT and target is not Kind.VC:
        raise InvalidControl(f"I({ref.element}) in {e.id}: not a controlled voltage source")


def kind_sorted_incidence_order(c: Circuit, ic_types=None):
    """Canonical branch permutation ``[C, L, R, Vs, Vc, Is, Ic1..Ic4]``.

    Stable in file order within each kind.  Without ``ic_types`` (element id
    -> type) the controlled current sources keep their file order.
    """
    ic_types = ic_types or {}

    def key(i):
        e = c.branches[i]
        sub = ic_types.get(e.id, 0) if e.kind is Kind.IC else 0
        return (_KIND_RANK[e.kind], sub, i)

    return sorted(range(len(c.branches)), key=key)


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<lp>\()|(?P<rp>\))|(?P<comma>,)|(?P<word>[^\s(),]+))")
_NUMBER = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|t|g|k|m|u|n|p|f)?$", re.IGNORECASE
)
_SCALE = {
    None: 1.0,
    "t": 1e12,
    "g": 1e9,
    "meg": 1e6,
    "k": 1e3,
    "m": 1e-3,
    "u": 1e-6,
    "n": 1e-9,
    "p": 1e-12,
    "f": 1e-15,
}


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(line, lineno):
    toks = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if m is None or m.end() == pos:
            if line[pos:].strip() == "":
                break
            raise NetlistSyntaxError("unexpected character", lineno, pos + 1)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start + 1))
        pos = m.end()
    return toks


def parse_number(text):
    m = _NUMBER.match(text)
    if m is None:
        raise ValueError(text)
    suffix = m.group(2).lower() if m.group(2) else None
    return float(m.group(1)) * _SCALE[suffix]


class _Cursor:
    def __init__(self, toks, lineno, line):
        self.toks = toks
        self.i = 0
        self.lineno = lineno
        self.line = line

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self, what="token"):
        t = self.peek()
        if t is None:
            raise NetlistSyntaxError(f"expected {what}", self.lineno, len(self.line) + 1)
        self.i += 1
        return t

    def word(self, what):
        t = self.next(what)
        if t.kind != "word":
            raise NetlistSyntaxError(f"expected {what}", self.lineno, t.col)
        return t

    def expect(self, kind, what):
        t = self.next(what)
        if t.kind != kind:
            raise NetlistSyntaxError(f"expected {what}", self.lineno, t.col)
        return t

    def number(self):
        t = self.word("number")
        try:
            return parse_number(t.text)
        except ValueError:
            raise NetlistSyntaxError(f"invalid number {t.text!r}", self.lineno, t.col) from None

    def done(self):
        return self.i >= len(self.toks)


@dataclass
class _RawElement:
    id: str
    letter: str
    n1: str
    n2: str
    controls: list
    model: tuple  # (name, [numbers], col)
    lineno: int


_BRANCH_MODELS = {"D": (dev.DiodeShockley, 2), "SW": (dev.SmoothSwitch, 4)}
_SOURCE_MODELS = {"POLY": (dev.PolynomialSource, None), "MOS": (dev.SmoothMos, (2, 4)),
                  "TANH": (dev.TanhSource, 2)}
_WAVE_MODELS = {"SIN": (dev.WaveformSin, (3, 4)), "TABLE": (dev.TableWaveform, None)}


def _parse_element(cur, first):
    letter = first.text[0].upper()
    n1 = cur.word("node").text
    n2 = cur.word("node").text
    controls = []
    t = cur.peek()
    if t is not None and t.kind == "word" and t.text.upper() == "CTRL":
        cur.next()
        while True:
            t = cur.peek()
            nxt = cur.peek(1)
            if t is None or t.kind != "word" or t.text.upper() not in ("V", "I") or nxt is None \
                    or nxt.kind != "lp":
                break
            cur.next()
            cur.next()
            args = [cur.word("control argument").text]
            sep = cur.next("')'")
            if sep.kind == "comma":
                args.append(cur.word("node").text)
                sep = cur.next("')'")
            if sep.kind != "rp":
                raise NetlistSyntaxError("expected ')'", cur.lineno, sep.col)
            controls.append((t.text.upper(), args, t.col))
        if not controls:
            col = t.col if t is not None else len(cur.line) + 1
            raise NetlistSyntaxError("CTRL needs at least one V(...) or I(...)", cur.lineno, col)
    t = cur.word("model")
    if t.text.upper() == "DC":
        model = ("DC", [cur.number()], t.col)
    elif cur.peek() is not None and cur.peek().kind == "lp":
        cur.next()
        nums = []
        while True:
            nt = cur.next("')'")
            if nt.kind == "rp":
                break
            if nt.kind == "comma":
                continue
            if nt.kind != "word":
                raise NetlistSyntaxError("expected number", cur.lineno, nt.col)
            try:
                nums.append(parse_number(nt.text))
            except ValueError:
                raise NetlistSyntaxError(f"invalid number {nt.text!r}", cur.lineno,
                                         nt.col) from None
        model = (t.text.upper(), nums, t.col)
    else:
        try:
            model = ("VALUE", [parse_number(t.text)], t.col)
        except ValueError:
            raise UnknownModel(f"line {cur.lineno}: unknown model {t.text!r}") from None
    if not cur.done():
        raise NetlistSyntaxError("unexpected trailing input", cur.lineno, cur.peek().col)
    return _RawElement(first.text, letter, n1, n2, controls, model, cur.lineno)


def _build_behavior(raw: _RawElement, kind: Kind, n_controls: int):
    name, nums, col = raw.model
    where = f"line {raw.lineno}, column {col}"

    def arity(cls, spec):
        if spec is None:
            return
        lo, hi = (spec, spec) if isinstance(spec, int) else spec
        if not lo <= len(nums) <= hi:
            raise InvalidParameter(f"{where}: {name} takes {spec} parameters, got {len(nums)}")

    try:
        if kind is Kind.C:
            if name != "VALUE":
                raise UnknownModel(f"{where}: capacitor model {name!r}")
            return dev.LinearC(nums[0])
        if kind is Kind.L:
            if name != "VALUE":
                raise UnknownModel(f"{where}: inductor model {name!r}")
            return dev.LinearL(nums[0])
        if kind is Kind.R:
            if name == "VALUE":
                if n_controls:
                    raise InvalidControl(f"{where}: an ohmic resistor takes no controls")
                if not nums[0] > 0:
                    raise InvalidParameter(f"{where}: resistance must be positive")
                return dev.LinearG(1.0 / nums[0])
            if name == "G":
                arity(None, 1)
                if n_controls:
                    raise InvalidControl(f"{where}: an ohmic resistor takes no controls")
                return dev.LinearG(nums[0])
            if name not in _BRANCH_MODELS:
                raise UnknownModel(f"{where}: resistor model {name!r}")
            cls, spec = _BRANCH_MODELS[name]
            arity(cls, spec)
            model = cls(*nums)
            if model.n_controls != n_controls:
                raise InvalidControl(
                    f"{where}: {name} needs {model.n_controls} controls, got {n_controls}")
            return model
        if kind in (Kind.VS, Kind.IS):
            if name == "VALUE" or name == "DC":
                return dev.WaveformDC(nums[0])
            if name not in _WAVE_MODELS:
                raise UnknownModel(f"{where}: waveform {name!r}")
            cls, spec = _WAVE_MODELS[name]
            arity(cls, spec)
            if cls is dev.TableWaveform:
                if len(nums) % 2:
                    raise InvalidParameter(f"{where}: TABLE needs (time, value) pairs")
                return cls(tuple(nums[0::2]), tuple(nums[1::2]))
            return cls(*nums)
        # controlled sources
        if name not in _SOURCE_MODELS:
            raise UnknownModel(f"{where}: controlled source model {name!r}")
        cls, spec = _SOURCE_MODELS[name]
        arity(cls, spec)
        model = cls(tuple(nums)) if cls is dev.PolynomialSource else cls(*nums)
        model.check_arity(n_controls)
        return model
    except InvalidParameter as exc:
        if str(exc).startswith("line"):
            raise
        raise InvalidParameter(f"{where}: {exc}") from None


def _natural_key(label):
    try:
        return (0, int(label), label)
    except ValueError:
        return (1, 0, label)


def parse_netlist(text: str, order: str = "file", name: str = "") -> Circuit:
    """Parse netlist text into a validated :class:`Circuit`.

    ``order="file"`` numbers nodes by first appearance on element lines;
    ``order="paper-example"`` sorts node labels naturally (numeric labels
    ascending), which is the node order used for golden matrices.
    """
    if order not in ("file", "paper-example"):
        raise ValueError(f"unknown node order {order!r}")
    raws = []
    couplings = []
    title = name
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("*"):
            continue
        if stripped.startswith("."):
            head = stripped.split(None, 1)
            directive = head[0].lower()
            if directive == ".title":
                title = head[1].strip() if len(head) > 1 else ""
                continue
            if directive == ".end":
                break
            raise NetlistSyntaxError(f"unsupported directive {head[0]!r}", lineno,
                                     line.index(".") + 1)
        toks = _tokenize(line, lineno)
        cur = _Cursor(toks, lineno, line)
        first = cur.word("element name")
        letter = first.text[0].upper()
        if letter == "K":
            l1 = cur.word("inductor").text
            l2 = cur.word("inductor").text
            k = cur.number()
            if not cur.done():
                raise NetlistSyntaxError("unexpected trailing input", lineno, cur.peek().col)
            couplings.append(Coupling(first.text, l1, l2, k))
            continue
        if letter not in "RCLVEIG":
            raise NetlistSyntaxError(f"unknown element type {first.text[0]!r}", lineno, first.col)
        raw = _parse_element(cur, first)
        if raw.n1 == raw.n2:
            raise SelfLoop(f"line {lineno}: element {raw.id} connects node {raw.n1!r} to itself")
        raws.append(raw)

    ids = set()
    for r in raws:
        if r.id in ids:
            raise DuplicateElementId(f"line {r.lineno}: duplicate element id {r.id!r}")
        ids.add(r.id)

    labels = []
    for r in raws:
        for nd in (r.n1, r.n2):
            if nd != GROUND and nd not in labels:
                labels.append(nd)
    if order == "paper-example":
        labels.sort(key=_natural_key)
    nodes = (GROUND, *labels)
    node_index = {nd: i for i, nd in enumerate(nodes)}
    if not raws:
        raise DisconnectedCircuit("netlist contains no elements")
    if GROUND not in {nd for r in raws for nd in (r.n1, r.n2)}:
        raise DisconnectedCircuit("no element is connected to ground '0'")

    def kind_of(r):
        if r.letter in "RCL":
            return Kind(r.letter)
        if r.letter == "E" or (r.letter == "V" and r.controls):
            return Kind.VC
        if r.letter == "G" or (r.letter == "I" and r.controls):
            return Kind.IC
        return Kind.VS if r.letter == "V" else Kind.IS

    kinds = {r.id: kind_of(r) for r in raws}
    elements = []
    for r in raws:
        kind = kinds[r.id]
        if r.letter in "EG" and not r.controls:
            raise InvalidControl(f"line {r.lineno}: {r.id} needs a CTRL clause")
        refs = []
        for letter, args, col in r.controls:
            refs.append(_resolve_control(letter, args, col, r, kinds, node_index))
        behavior = _build_behavior(r, kind, len(refs))
        elements.append(Element(r.id, kind, node_index[r.n1], node_index[r.n2], behavior,
                                tuple(refs)))
    return Circuit(nodes, tuple(elements), title, tuple(couplings))


def _resolve_control(letter, args, col, raw, kinds, node_index):
    where = f"line {raw.lineno}, column {col}"
    if letter == "V":
        if len(args) == 2:
            for nd in args:
                if nd not in node_index:
                    raise DanglingNode(f"{where}: node {nd!r} appears in a control but on no branch")
            return ControlRef(ControlKind.NODE_PAIR_VOLTAGE,
                              nodes=(node_index[args[0]], node_index[args[1]]))
        (x,) = args
        if x in kinds:
            return ControlRef(ControlKind.BRANCH_VOLTAGE, element=x)
        if x in node_index:
            return ControlRef(ControlKind.NODE_PAIR_VOLTAGE, nodes=(node_index[x], 0))
        raise DanglingNode(f"{where}: {x!r} is neither an element nor a node on a branch")
    if len(args) != 1:
        raise NetlistSyntaxError("I(...) takes one element id", raw.lineno, col)
    (x,) = args
    kind = kinds.get(x)
    if kind is Kind.L:
        return ControlRef(ControlKind.INDUCTOR_CURRENT, element=x)
    if kind is Kind.VC:
        return ControlRef(ControlKind.VC_CURRENT, element=x)
    if kind is None:
        raise InvalidControl(f"{where}: I({x}) references an unknown element")
    raise InvalidControl(f"{where}: I({x}) must reference an inductor or a controlled voltage source")


def serialize_netlist(c: Circuit) -> str:
    """Inverse of :func:`parse_netlist` for circuits whose ids follow the letter rule."""
    lines = []
    if c.name:
        lines.append(f".title {c.name}")
    for e in c.branches:
        parts = [e.id, c.nodes[e.from_node], c.nodes[e.to_node]]
        if e.controls:
            parts.append("CTRL")
            parts.extend(ref.describe(c) for ref in e.controls)
        parts.append(e.behavior.to_netlist())
        lines.append(" ".join(parts))
    for k in c.couplings:
        lines.append(f"{k.id} {k.first} {k.second} {dev.format_number(k.k)}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def load_netlist(path, order="file") -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read(), order=order)
