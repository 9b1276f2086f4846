"""Cluster unknown-protocol packet captures from the command line.

Subcommands: ``analyze``, ``sweep``, ``generate``, ``benchmark``.

Every :class:`RunConfig` field is a kebab-case flag (``--gram-bytes``,
``--k-range`` ...).  Defaults can also come from the environment as
``PROTOCLUST_<FIELD>`` (``PROTOCLUST_SEED=7``, ``PROTOCLUST_K_RANGE=2-12``);
explicit flags win.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from .capture import (Dataset, Layer, attach_labels, load_pcap, read_labels, strip_dataset,
                      stratified_sample)
from .config import SEED_SAMPLE, RunConfig, derive_seed
from .hybrid import (STRATEGY_ALIASES, PipelineError, get_strategy, run_benchmark,
                     run_pipeline, winners, write_grid)
from .optimize import (header_corpus, select_header_length, select_topic_size, write_header_sweep,
                       write_topic_sweep)
from .synth import SpecError, SyntheticSpec, builtin_specs, transport_mix_spec, write_dataset

log = logging.getLogger("protoclust")

ENV_PREFIX = "PROTOCLUST_"
EXIT_USAGE = 2
EXIT_FAILURE = 1


def parse_range(text) -> tuple:
    """``"2-20"``, ``"4-64:2"`` or ``"3,5,8"`` -> tuple of ints."""
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    text = str(text).strip()
    if "," in text:
        return tuple(int(x) for x in text.split(",") if x)
    step = 1
    if ":" in text:
        text, step_s = text.split(":")
        step = int(step_s)
    if "-" in text:
        lo, hi = text.split("-")
        return tuple(range(int(lo), int(hi) + 1, step))
    return (int(text),)


def _optional(conv):
    def parse(text):
        return None if str(text).lower() in ("", "none", "auto") else conv(text)
    return parse


_CONVERTERS = {
    "alpha": _optional(float), "header_len": _optional(int), "topic_size": _optional(int),
    "kmeans_k": _optional(int), "k_range": parse_range, "len_range": parse_range,
    "kmeans_k_range": parse_range,
}


def _converter(f: dataclasses.Field):
    if f.name in _CONVERTERS:
        return _CONVERTERS[f.name]
    default = f.default
    if isinstance(default, bool):
        return lambda s: str(s).lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


def add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    for f in dataclasses.fields(RunConfig):
        g.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, type=_converter(f),
                       default=argparse.SUPPRESS, metavar=f.name.upper())


def config_from_args(args) -> RunConfig:
    values = {}
    for f in dataclasses.fields(RunConfig):
        env = os.environ.get(ENV_PREFIX + f.name.upper())
        if env is not None:
            values[f.name] = _converter(f)(env)
        # flags absent from the namespace were not given; "auto" parses to None
        if hasattr(args, "cfg_" + f.name):
            values[f.name] = getattr(args, "cfg_" + f.name)
    return RunConfig(**values)


def load_dataset(pcap, labels: Optional[str], layer: str, name: Optional[str] = None,
                 cap: int = 200, seed: int = 0) -> Dataset:
    packets = load_pcap(pcap)
    if labels:
        packets = attach_labels(packets, read_labels(labels))
    name = name or Path(pcap).stem
    if len(packets) > cap:
        if labels:
            return stratified_sample(packets, cap, derive_seed(seed, SEED_SAMPLE), layer, name)
        log.warning("%s holds %d packets; keeping the first %d", pcap, len(packets), cap)
        packets = packets[:cap]
    return Dataset(packets, Layer(layer), name, cap=cap)


# --------------------------------------------------------------------------
# commands

def cmd_analyze(args) -> int:
    cfg = config_from_args(args)
    if args.require_eval and not args.labels:
        print("error: --require-eval needs --labels", file=sys.stderr)
        return EXIT_USAGE
    d = load_dataset(args.pcap, args.labels, args.layer, cap=args.cap, seed=cfg.seed)
    report = run_pipeline(d, get_strategy(args.strategy), cfg)
    out = Path(args.out or Path(args.pcap).with_suffix(".report.json"))
    out.write_text(report.to_json(timing=not args.no_timing))
    print(f"report: {out}")
    print(f"clusters: {report.k}  header_len: {report.header_len}  topic_size: {report.topic_size}")
    if report.scores is not None:
        s = report.scores
        print(f"ARI: {s['ari']:.4f}  satisfactory: {s['satisfactory']}")
    return 0


def _sweep_ari(d: Dataset, cfg: RunConfig, strategy, **fixed) -> Optional[float]:
    if d.labels is None:
        return None
    rep = run_pipeline(d, strategy, cfg.replace(**fixed))
    return rep.scores["ari"]


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    d = load_dataset(args.pcap, args.labels, args.layer, cap=args.cap, seed=cfg.seed)
    ari_strategy = get_strategy(args.ari_strategy)
    out = Path(args.out or Path(args.pcap).with_suffix(f".{args.sweep}-sweep.csv"))
    if args.sweep == "header":
        if d.osi_target == Layer.APPLICATION:
            print("error: application-layer datasets use the full payload; no header sweep",
                  file=sys.stderr)
            return EXIT_USAGE
        L, K, sweep = select_header_length(d, cfg.len_range, cfg.k_range, cfg)
        extra = {}
        if d.labels is not None:
            extra["ari"] = {r["length"]: _sweep_ari(d, cfg, ari_strategy, header_len=r["length"],
                                                    topic_size=r["best_K"]) for r in sweep}
        write_header_sweep(out, sweep, extra)
        print(f"sweep: {out}")
        print(f"chosen header_len: {L} (topic size {K})")
        return 0

    if d.osi_target != Layer.APPLICATION and cfg.header_len is None:
        print("error: a topic sweep on link/transport data needs --header-len", file=sys.stderr)
        return EXIT_USAGE
    payloads, _ = strip_dataset(d)
    corpus = header_corpus(payloads, cfg.header_len, d.osi_target, cfg)
    K, scores = select_topic_size(corpus, cfg.k_range, cfg, cfg.header_len)
    extra = {}
    if d.labels is not None:
        extra["ari"] = {s.K: _sweep_ari(d, cfg, ari_strategy, topic_size=s.K) for s in scores}
    write_topic_sweep(out, scores, extra)
    print(f"sweep: {out}")
    print(f"chosen topic_size: {K}")
    return 0


def cmd_generate(args) -> int:
    if args.builtin:
        specs = dict(builtin_specs(), **{"transport-mix": transport_mix_spec()})
        if args.builtin not in specs:
            print(f"error: unknown builtin {args.builtin!r}; choose from {sorted(specs)}", file=sys.stderr)
            return EXIT_USAGE
        spec = SyntheticSpec.from_dict(specs[args.builtin])
    elif args.spec:
        spec = SyntheticSpec.load(args.spec)
    else:
        print("error: give a spec file or --builtin NAME", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or f"{spec.name}.pcap")
    labels = Path(args.labels or out.with_suffix(".labels.csv"))
    packets = write_dataset(spec, out, labels, args.seed)
    print(f"wrote {len(packets)} packets to {out} and labels to {labels}")
    return 0


def load_manifest(path) -> list:
    """Manifest JSON: a list (or ``{"datasets": [...]}``) of ``{name, pcap, labels, layer}``.

    Relative paths resolve against the manifest's directory.
    """
    raw = json.loads(Path(path).read_text())
    entries = raw["datasets"] if isinstance(raw, dict) else raw
    base = Path(path).parent
    return [dict(e, pcap=str(base / e["pcap"]), labels=str(base / e["labels"])) for e in entries]


def cmd_benchmark(args) -> int:
    cfg = config_from_args(args)
    entries = load_manifest(args.manifest)
    if not entries:
        print("error: manifest lists no datasets", file=sys.stderr)
        return EXIT_USAGE
    datasets = [load_dataset(e["pcap"], e["labels"], e.get("layer", "transport"), e.get("name"),
                             args.cap, cfg.seed) for e in entries]
    names = args.strategies.split(",") if args.strategies != "all" else \
        ["netzob", "lda-kmeans", "lda-upgma", "tf-upgma", "hybrid"]
    strategies = [get_strategy(n) for n in names]
    grid = run_benchmark(datasets, strategies, cfg)
    out = Path(args.out or Path(args.manifest).with_suffix(".grid.csv"))
    if args.no_timing:
        for row in grid:
            row["seconds"] = None
    write_grid(out, grid)
    won = winners(grid)
    for ds in [d.name for d in datasets]:
        print(f"{ds}: winner {won.get(ds, 'none')}")
    print(f"HYBRID wins {sum(1 for w in won.values() if w == 'HYBRID')} of {len(datasets)} datasets")
    print(f"grid: {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="protoclust", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    strategies = sorted(STRATEGY_ALIASES)

    a = sub.add_parser("analyze", help="cluster one capture and write a JSON report")
    a.add_argument("pcap")
    a.add_argument("--labels", help="packet_index,label CSV")
    a.add_argument("--layer", choices=[x.value for x in Layer], default="transport")
    a.add_argument("--strategy", choices=strategies, default="hybrid")
    a.add_argument("--out")
    a.add_argument("--cap", type=int, default=200)
    a.add_argument("--require-eval", action="store_true", help="fail (exit 2) without labels")
    a.add_argument("--no-timing", action="store_true", help="omit the wall-clock field")
    add_config_flags(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="topic-size or header-length sweep to CSV")
    s.add_argument("pcap")
    s.add_argument("--labels")
    s.add_argument("--layer", choices=[x.value for x in Layer], default="transport")
    s.add_argument("--sweep", choices=["topics", "header"], required=True)
    s.add_argument("--ari-strategy", choices=strategies, default="lda-upgma",
                   help="approach scored at each sweep point when labels are given")
    s.add_argument("--out")
    s.add_argument("--cap", type=int, default=200)
    add_config_flags(s)
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("generate", help="write a synthetic labelled capture")
    g.add_argument("spec", nargs="?", help="synthetic spec JSON")
    g.add_argument("--builtin", help="use a built-in spec instead")
    g.add_argument("--out")
    g.add_argument("--labels")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("benchmark", help="ARI grid over datasets x strategies")
    b.add_argument("manifest")
    b.add_argument("--strategies", default="all", help=f"comma list of {strategies} or 'all'")
    b.add_argument("--out")
    b.add_argument("--cap", type=int, default=200)
    b.add_argument("--no-timing", action="store_true")
    add_config_flags(b)
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, ValueError, SpecError) as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
