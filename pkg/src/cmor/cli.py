"""Command-line entry point: ``cmor {verify,sweep,xor,ttest,train} [--config FILE] [overrides]``."""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from cmor.bank import classify_value, new_bank, program, read_conductance_batch, save_bank
from cmor.config import EXPERIMENTS, ConfigError, RunConfig, load_config
from cmor.eca import decode_rule, input_bits
from cmor.experiments import (
    CLUSTER_GAP_FRACTION,
    level_ttest,
    major_clusters,
    mirror_check,
    sweep,
    verify_logic,
    xor_elements,
    xor_experiment,
    xor_pairs_for_element,
)
from cmor.train import (
    LabeledDataset,
    SeparabilityWarning,
    TrainHyperparams,
    apply_plan,
    featurize,
    load_dataset,
    load_plan,
    save_dataset,
    save_plan,
    train_plan,
)

log = logging.getLogger("cmor")


def _programmed_bank(cfg: RunConfig, writes):
    bank = new_bank(cfg.n, cfg.m, cfg.device_params(), cfg.g_b)
    for w in writes:
        program(bank, (w[0], w[1]), w[2] if len(w) > 2 else 1)
    return bank


def run_verify(cfg: RunConfig, out: Path) -> tuple[int, str]:
    report = verify_logic(decode_rule(cfg.rule), cfg.n, cfg.m)
    bad_inputs: dict[int, int] = {}
    for x, *_ in report.mismatches:
        bad_inputs[x] = bad_inputs.get(x, 0) + 1
    lines = ["input,bits,mismatched_cells"]
    lines += [f"{x},{x:0{cfg.n}b},{bad_inputs.get(x, 0)}" for x in range(2**cfg.n)]
    (out / f"verify_rule{cfg.rule}.csv").write_text("\n".join(lines) + "\n")
    detail = [f"rule {cfg.rule}, n={cfg.n}, m={cfg.m}: {report.summary()}"]
    detail += [f"mismatch input={x} iteration={g} cell={c} expected={e} got={v}" for x, g, c, e, v in report.mismatches]
    (out / f"verify_rule{cfg.rule}.txt").write_text("\n".join(detail) + "\n")
    return (0 if report.passed else 1), report.summary()


def run_sweep(cfg: RunConfig, out: Path) -> tuple[int, str]:
    rule = decode_rule(cfg.rule)
    bank = _programmed_bank(cfg, cfg.program)
    result = sweep(rule, bank)
    gap = CLUSTER_GAP_FRACTION * cfg.lrs_nominal
    (out / f"sweep_rule{cfg.rule}.csv").write_text(result.to_csv(cluster_gap=gap))
    save_bank(bank, out / "bank.txt")
    n_clusters = int(major_clusters(result, cfg.lrs_nominal).max()) + 1
    mirror = mirror_check(result)
    mirror_text = "skipped" if mirror.skipped else ("PASS" if mirror.passed else "FAIL")
    status = 1 if (not mirror.skipped and not mirror.passed) else 0
    return status, f"clusters={n_clusters} mirror={mirror_text}"


def run_xor(cfg: RunConfig, out: Path) -> tuple[int, str]:
    rule = decode_rule(cfg.rule)
    elements = xor_elements(rule, cfg.n, cfg.m, cfg.bit_pair)
    if not elements:
        raise RuntimeError(f"no reservoir element computes XOR of cells {cfg.bit_pair} under rule {cfg.rule}")
    element = elements[0]
    bank = _programmed_bank(cfg, [element])
    result = xor_experiment(rule, bank, cfg.bit_pair, cfg.fixed_bits or None)
    (out / f"xor_rule{cfg.rule}.csv").write_text(result.to_csv())
    notes = [
        f"bit pair {cfg.bit_pair}: XOR computed by elements {elements}; programmed {element}",
        f"element (2,7) serves pairs {xor_pairs_for_element(rule, cfg.n, cfg.m, (2, 7))}"
        if cfg.m >= 2 and cfg.n >= 7
        else "",
        f"classes (00,01,10,11) = {result.classes()} -> {'XOR' if result.is_xor() else 'not XOR'}",
    ]
    (out / f"xor_rule{cfg.rule}.txt").write_text("\n".join(x for x in notes if x) + "\n")
    ok = result.is_xor()
    return (0 if ok else 1), f"pair={cfg.bit_pair[0]},{cfg.bit_pair[1]} element={element[0]},{element[1]} XOR={'PASS' if ok else 'FAIL'}"


def run_ttest(cfg: RunConfig, out: Path) -> tuple[int, str]:
    rule = decode_rule(cfg.rule)
    top = cfg.device_params().n_levels - 1
    writes = cfg.program or ((*cfg.addr_a, 1), (*cfg.addr_b, top))
    bank = _programmed_bank(cfg, writes)
    result = sweep(rule, bank)
    stats = level_ttest(result, cfg.addr_a, cfg.addr_b)
    (out / f"ttest_rule{cfg.rule}.csv").write_text(
        _ttest_csv(result, stats, cfg.addr_a, cfg.addr_b)
    )
    (out / f"ttest_rule{cfg.rule}.txt").write_text(stats.summary())
    save_bank(bank, out / "bank.txt")
    verdict = "distinguishable" if stats.significant else "not-distinguishable"
    return 0, f"t={stats.t:.6g} p={stats.p:.6g} {verdict}"


def _ttest_csv(result, stats, addr_a, addr_b) -> str:
    ea, eb = result.enabled(addr_a).astype(int), result.enabled(addr_b).astype(int)
    lines = ["input,g_sigma_siemens,class,enabled_a,enabled_b,group"]
    lines += [
        f"{x},{result.g_sigma[x]:.8e},{result.classes[x]},{ea[x]},{eb[x]},{stats.groups[x]}"
        for x in range(len(result.inputs))
    ]
    return "\n".join(lines) + "\n"


def xor_dataset(n: int, bit_pair: tuple[int, int]) -> LabeledDataset:
    bits = input_bits(range(2**n), n)
    labels = np.where(bits[:, bit_pair[0] - 1] ^ bits[:, bit_pair[1] - 1], 1, -1)
    return LabeledDataset.from_arrays(bits, labels)


def run_train(cfg: RunConfig, out: Path) -> tuple[int, str]:
    rule = decode_rule(cfg.rule)
    if cfg.dataset:
        dataset = load_dataset(cfg.dataset)
        if dataset.n != cfg.n:
            raise ConfigError(f"dataset: lattice size {dataset.n} does not match n={cfg.n}")
    else:
        dataset = xor_dataset(cfg.n, cfg.bit_pair)
        save_dataset(dataset, out / "train_dataset.txt")
    params = cfg.device_params()
    hp = TrainHyperparams(epochs=cfg.epochs, learning_rate=cfg.learning_rate, l2=cfg.l2)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SeparabilityWarning)
        plan, model = train_plan(dataset, rule, cfg.m, params, hp)
    for w in caught:
        log.warning("%s", w.message)
    plan_path = out / "plan.txt"
    save_plan(plan, plan_path)

    # replay the file as written, on a fresh bank
    replay = load_plan(plan_path)
    x = featurize(dataset, rule, cfg.m)
    bank = apply_plan(replay, cfg.n, cfg.m, params)
    g = read_conductance_batch(bank, x.reshape(-1, cfg.m, cfg.n))
    pred = classify_value(g, replay.g_b)
    replay_acc = float(np.mean(pred == dataset.labels))
    lines = ["item,bits,label,g_sigma_siemens,class"]
    lines += [
        f"{k},{s.to_string()},{y},{g[k]:.8e},{pred[k]}" for k, (s, y) in enumerate(dataset.items)
    ]
    (out / "train_predictions.csv").write_text("\n".join(lines) + "\n")
    status = 0 if replay_acc == plan.achieved_accuracy else 1
    return status, (
        f"items={len(dataset)} writes={len(plan.writes)} accuracy={plan.achieved_accuracy:.6f} "
        f"replay={replay_acc:.6f} linear_accuracy={model.accuracy(x, dataset.labels):.6f}"
    )


RUNNERS = {
    "verify": run_verify,
    "sweep": run_sweep,
    "xor": run_xor,
    "ttest": run_ttest,
    "train": run_train,
}


def run(config: RunConfig, out: Path | None = None) -> int:
    """Run one experiment, write its artifacts, print a one-line summary, return an exit status."""
    if config.experiment is None:
        raise ConfigError("experiment: not set")
    out = Path(out if out is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    status, metric = RUNNERS[config.experiment](config, out)
    print(f"{config.experiment} rule={config.rule} {metric}")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmor", description="ECA reservoir + ReRAM readout simulator")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key=value config file")
        p.add_argument("--out", type=Path, help="artifact directory (overrides 'output')")
        p.add_argument("--rule", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--gb", type=float, dest="g_b", help="threshold conductance, siemens")
        p.add_argument("--lrs", type=float, dest="lrs_nominal", help="LRS conductance, siemens")
        p.add_argument("--parasitic", type=float, dest="parasitic_enabled", help="siemens")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        overrides = {
            k: getattr(args, k)
            for k in ("rule", "seed", "g_b", "lrs_nominal", "parasitic_enabled")
            if getattr(args, k) is not None
        }
        cfg = cfg.replace(experiment=args.experiment, **overrides)
        return run(cfg, args.out)
    except Exception as exc:  # noqa: BLE001 - report any failure as a nonzero exit
        print(f"error: {args.experiment}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
