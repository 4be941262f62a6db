"""Space-time diagrams of causal traces: DOT, hand-laid SVG and JSONL.

Time runs left to right, one horizontal lane per node. Classical messages
are dashed, quantum ones solid; a message sent after consuming a shared
resource is drawn double. Shared resources appear as spans joining the
creation points on each party's lane.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping
from xml.sax.saxutils import escape

from .errors import BadParams, InvalidTrace
from .trace import (
    CONSUME,
    CREATE,
    LOCAL,
    RECEIVE,
    SEND,
    CausalTrace,
    Event,
    hasse_reduce,
    validate,
)


@dataclass(frozen=True)
class DiagramStyle:
    classical: str = "dashed"
    quantum: str = "solid"
    penwidth: float = 1.0
    post_consumption_factor: float = 2.0
    marker_type1: str = "dot"
    marker_type2: str = "ket"
    marker_noisy: str = "cross"
    marker_send: str = "point"
    marker_receive: str = "none"
    marker_resource: str = "dot"
    pair_shape: str = "curve"
    multiparty_shape: str = "w"
    pitch_x: float = 60.0
    pitch_y: float = 50.0
    sub_x: float = 12.0
    margin: float = 40.0
    radius: float = 4.0
    font_size: int = 11
    lane_color: str = "#999999"
    ink: str = "#000000"
    resource_color: str = "#1f5fbf"

    @classmethod
    def from_mapping(cls, data: Mapping) -> "DiagramStyle":
        known = {f.name for f in fields(cls)}
        bad = sorted(set(data) - known)
        if bad:
            raise BadParams(f"unknown style keys {bad}")
        return replace(cls(), **dict(data))

    @classmethod
    def from_json(cls, path: str | Path) -> "DiagramStyle":
        return cls.from_mapping(json.loads(Path(path).read_text()))

    def marker(self, ev: Event) -> str:
        """Exactly one marker per event; noise overrides the operation class."""
        if ev.noisy and ev.kind in (LOCAL, SEND):
            return self.marker_noisy
        if ev.kind == LOCAL:
            return self.marker_type2 if ev.op_class == "TypeII" else self.marker_type1
        if ev.kind == SEND:
            return self.marker_send
        if ev.kind == RECEIVE:
            return self.marker_receive
        return self.marker_resource

    def stroke(self, channel: str) -> str:
        return self.quantum if channel == "quantum" else self.classical

    def width(self, post_consumption: bool) -> float:
        return self.penwidth * (self.post_consumption_factor if post_consumption else 1.0)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_STYLE = DiagramStyle()


def _checked(trace: CausalTrace) -> None:
    findings = validate(trace)
    if findings:
        raise InvalidTrace("; ".join(f"{f.kind}: {f.message}" for f in findings[:5]))


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _lane_name(node: int, names: Mapping[int, str] | None) -> str:
    return (names or {}).get(node, f"P{node}")


def _resources(trace: CausalTrace) -> dict[int, list[Event]]:
    """Creation events per resource id, in trace order."""
    out: dict[int, list[Event]] = {}
    for ev in trace.events:
        if ev.kind == CREATE and "resource" in ev.payload:
            out.setdefault(int(ev.payload["resource"]), []).append(ev)
    return out


def _edge_kind(trace: CausalTrace, a: int, b: int) -> str:
    ea, eb = trace.events[a], trace.events[b]
    if ea.node == eb.node:
        return "lane"
    if ea.kind == SEND and eb.kind == RECEIVE:
        return "message"
    return "causal"


# ---------------------------------------------------------------- DOT

_DOT_SHAPES = {"dot": "point", "ket": "doublecircle", "cross": "X", "point": "point", "none": "point"}


def to_dot(trace: CausalTrace, style: DiagramStyle | None = None, mode: str = "full",
           names: Mapping[int, str] | None = None) -> str:
    """Graphviz text; ``mode`` is ``full`` (all causal edges) or ``hasse`` (reduced)."""
    style = style or DEFAULT_STYLE
    if mode not in ("full", "hasse"):
        raise BadParams(f"unknown render mode {mode!r}")
    _checked(trace)
    lines = [
        "digraph spacetime {",
        "  rankdir=LR;",
        "  node [shape=point, width=0.08, label=\"\"];",
    ]
    for node in sorted(trace.lanes):
        lines.append(f"  subgraph cluster_lane_{node} {{")
        lines.append(f"    label=\"{_lane_name(node, names)}\";")
        lines.append("    style=invis;")
        for eid in trace.lanes[node]:
            ev = trace.events[eid]
            mk = style.marker(ev)
            attrs = [
                f"shape={_DOT_SHAPES.get(mk, 'point')}",
                f"class=\"event {ev.kind} {ev.op_class}{' noisy' if ev.noisy else ''}\"",
                f"tooltip=\"{ev.kind}@{ev.wall_step}\"",
            ]
            if mk == "none":
                attrs.append("width=0.02")
            lines.append(f"    e{eid} [{', '.join(attrs)}];")
        lines.append("  }")
    edges = hasse_reduce(trace) if mode == "hasse" else trace.edges
    for a, b in sorted(edges):
        kind = _edge_kind(trace, a, b)
        attrs = [f"class=\"causal {kind}\""]
        if kind == "message":
            ev = trace.events[a]
            attrs.append(f"style={style.stroke(ev.channel)}")
            attrs.append(f"penwidth={_fmt(style.width(ev.post_consumption))}")
            attrs.append(f"label=\"{ev.units}\"")
        else:
            attrs.append("style=solid")
            attrs.append(f"penwidth={_fmt(style.penwidth)}")
        lines.append(f"  e{a} -> e{b} [{', '.join(attrs)}];")
    for rid, evs in sorted(_resources(trace).items()):
        evs = sorted(evs, key=lambda e: e.node)
        for x, y in zip(evs, evs[1:]):
            lines.append(
                f"  e{x.id} -> e{y.id} [class=\"resource\", dir=none, style=dotted, "
                f"constraint=false, color=\"{style.resource_color}\", tooltip=\"{x.payload.get('species', '')}#{rid}\"];"
            )
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- SVG


def _layout(trace: CausalTrace, style: DiagramStyle) -> tuple[dict[int, float], dict[int, tuple[float, float]]]:
    lanes = sorted(trace.lanes)
    ys = {node: style.margin + i * style.pitch_y for i, node in enumerate(lanes)}
    pos: dict[int, tuple[float, float]] = {}
    slot: dict[tuple[int, int], int] = {}
    for ev in trace.events:
        k = slot.get((ev.node, ev.wall_step), 0)
        slot[(ev.node, ev.wall_step)] = k + 1
        x = style.margin + 60.0 + ev.wall_step * style.pitch_x + k * style.sub_x
        pos[ev.id] = (x, ys[ev.node])
    return ys, pos


def _glyph(ev: Event, x: float, y: float, style: DiagramStyle) -> str:
    mk = style.marker(ev)
    r = style.radius
    cls = f"event {ev.kind.lower()}"
    head = f'<g class="{cls} marker-{mk}" data-id="{ev.id}">'
    if mk == "cross":
        body = (f'<path d="M{_fmt(x - r)},{_fmt(y - r)} L{_fmt(x + r)},{_fmt(y + r)} '
                f'M{_fmt(x - r)},{_fmt(y + r)} L{_fmt(x + r)},{_fmt(y - r)}" stroke="{style.ink}" stroke-width="2"/>')
    elif mk == "ket":
        body = (f'<text x="{_fmt(x - 2 * r)}" y="{_fmt(y + r)}" font-size="{style.font_size + 3}">|</text>'
                f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r * 0.8)}" fill="{style.ink}"/>'
                f'<text x="{_fmt(x + r)}" y="{_fmt(y + r)}" font-size="{style.font_size + 3}">⟩</text>')
    elif mk == "none":
        body = f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="0" fill="none"/>'
    elif mk == "point":
        body = f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r * 0.5)}" fill="{style.ink}"/>'
    else:
        color = style.resource_color if ev.kind in (CREATE, CONSUME) else style.ink
        body = f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{color}"/>'
    return f"{head}{body}</g>"


def to_svg(trace: CausalTrace, style: DiagramStyle | None = None,
           names: Mapping[int, str] | None = None) -> str:
    style = style or DEFAULT_STYLE
    _checked(trace)
    ys, pos = _layout(trace, style)
    width = max([x for x, _ in pos.values()], default=style.margin) + style.margin + 40
    height = max(ys.values(), default=style.margin) + style.margin
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" font-family="sans-serif">',
    ]
    for node in sorted(ys):
        y = ys[node]
        out.append(
            f'<g class="lane" data-node="{node}"><line x1="{_fmt(style.margin + 40)}" y1="{_fmt(y)}" '
            f'x2="{_fmt(width - style.margin / 2)}" y2="{_fmt(y)}" stroke="{style.lane_color}"/>'
            f'<text x="{_fmt(style.margin / 2)}" y="{_fmt(y + 4)}" font-size="{style.font_size}">'
            f'{escape(_lane_name(node, names))}</text></g>'
        )
    for rid, evs in sorted(_resources(trace).items()):
        evs = sorted(evs, key=lambda e: ys[e.node])
        if len(evs) < 2:
            continue
        pts = [pos[e.id] for e in evs]
        species = escape(str(evs[0].payload.get("species", "")))
        if len(evs) == 2:
            (x1, y1), (x2, y2) = pts
            cx = min(x1, x2) - style.pitch_x / 3
            d = f"M{_fmt(x1)},{_fmt(y1)} Q{_fmt(cx)},{_fmt((y1 + y2) / 2)} {_fmt(x2)},{_fmt(y2)}"
            shape = style.pair_shape
        else:
            # W shape: a hinge touching every party lane
            xs = min(x for x, _ in pts) - style.pitch_x / 3
            segs = [f"M{_fmt(pts[0][0])},{_fmt(pts[0][1])}"]
            for (x1, y1), (x2, y2) in zip(pts, pts[1:]):
                segs.append(f"L{_fmt(xs)},{_fmt((y1 + y2) / 2)} L{_fmt(x2)},{_fmt(y2)}")
            d = " ".join(segs)
            shape = style.multiparty_shape
        out.append(
            f'<path class="resource-span {shape}" data-resource="{rid}" data-species="{species}" d="{d}" '
            f'fill="none" stroke="{style.resource_color}" stroke-dasharray="2,2"/>'
        )
    for ev in trace.events:
        if ev.kind != RECEIVE:
            continue
        send = trace.events[int(ev.payload["send"])]
        (x1, y1), (x2, y2) = pos[send.id], pos[ev.id]
        dash = ' stroke-dasharray="5,4"' if style.stroke(send.channel) == "dashed" else ""
        cls = f"message {send.channel}{' post-consumption' if send.post_consumption else ''}"
        w = style.width(send.post_consumption)
        if send.post_consumption:
            off = 1.5 * style.penwidth
            body = "".join(
                f'<line x1="{_fmt(x1)}" y1="{_fmt(y1 + o)}" x2="{_fmt(x2)}" y2="{_fmt(y2 + o)}" '
                f'stroke="{style.ink}" stroke-width="{_fmt(style.penwidth)}"{dash}/>'
                for o in (-off, off)
            )
        else:
            body = (f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                    f'stroke="{style.ink}" stroke-width="{_fmt(w)}"{dash}/>')
        label = (f'<text x="{_fmt((x1 + x2) / 2 + 3)}" y="{_fmt((y1 + y2) / 2 - 3)}" '
                 f'font-size="{style.font_size - 2}">{send.units}</text>') if send.units else ""
        out.append(f'<g class="{cls}" data-send="{send.id}" data-receive="{ev.id}">{body}{label}</g>')
    for ev in trace.events:
        x, y = pos[ev.id]
        out.append(_glyph(ev, x, y, style))
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- JSONL


def _jsonable(o):
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def to_jsonl(trace: CausalTrace) -> str:
    preds: dict[int, list[int]] = {}
    for a, b in trace.edges:
        preds.setdefault(b, []).append(a)
    lines = []
    for ev in trace.events:
        obj = {
            "id": ev.id, "node": ev.node, "kind": ev.kind, "channel": ev.channel,
            "post_consumption": ev.post_consumption, "op_class": ev.op_class, "noisy": ev.noisy,
            "units": ev.units, "unit_label": ev.unit_label, "wall_step": ev.wall_step,
            "causes": sorted(preds.get(ev.id, [])),
        }
        if ev.payload:
            obj["payload"] = ev.payload
        lines.append(json.dumps(obj, ensure_ascii=False, default=_jsonable))
    return "".join(line + "\n" for line in lines)


def read_jsonl(text: str) -> CausalTrace:
    """Inverse of :func:`to_jsonl`; edges come from each line's ``causes``."""
    trace = CausalTrace()
    pending: list[tuple[int, int, int]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BadParams(f"line {lineno}: {exc.msg}") from None
        eid = int(obj["id"])
        if eid != len(trace.events):
            raise BadParams(f"line {lineno}: expected event id {len(trace.events)}, got {eid}")
        ev = Event(eid, int(obj["node"]), obj["kind"], obj["channel"], bool(obj["post_consumption"]),
                   obj["op_class"], bool(obj["noisy"]), int(obj["units"]), obj["unit_label"],
                   int(obj["wall_step"]), obj.get("payload", {}))
        trace.events.append(ev)
        trace.succ.append([])
        trace.lanes.setdefault(ev.node, []).append(eid)
        pending.extend((lineno, int(c), eid) for c in obj["causes"])
    for lineno, c, eid in pending:
        if not 0 <= c < len(trace.events):
            raise BadParams(f"line {lineno}: cause {c} out of range")
        trace.edges.add((c, eid))
        trace.succ[c].append(eid)
        if c >= eid:
            trace.ordered = False
    return trace
