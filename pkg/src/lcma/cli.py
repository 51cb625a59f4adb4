"""Command-line front end: `lcma sim`, `lcma rates`, `lcma gen-spreading`.

Simulation settings come from a JSON config file, flags, or both (flags win).
Unknown config keys are rejected.  Exit code 0 on success, 2 on any
configuration problem.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from .channel_model import build_h, generate_spreading, load_spreading, save_spreading, table2_spreading
from .coeff_select import select_coefficients
from .rate_tools import estimate_rates
from .sim_harness import ConfigError, ExperimentConfig, emit_csv, run_experiment

__all__ = ["main"]


def _parse_snr(spec: str) -> tuple:
    """Accept 'a:b:step' (inclusive) or a comma-separated list of dB values."""
    spec = spec.strip().removesuffix("dB").strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"SNR range must be a:b:step, got {spec!r}")
        a, b, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("SNR step must be positive")
        count = int(round((b - a) / step))
        vals = [a + i * step for i in range(count + 1) if a + i * step <= b + 1e-9]
        if not vals:
            raise ConfigError(f"empty SNR range {spec!r}")
        return tuple(vals)
    return tuple(float(p) for p in spec.split(","))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcma",
        description="Lattice-code multiple-access uplink simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run a Monte Carlo FER/BER sweep")
    sim.add_argument("--config", help="JSON config file; flags override its values")
    sim.add_argument("--q", type=int, help="modulation/ring order (2^m)")
    sim.add_argument("--users", type=int, help="number of users K")
    sim.add_argument("--ns", type=int, help="spreading length N_S")
    sim.add_argument("--nr", type=int, help="receive antennas N_R")
    sim.add_argument("--fading", choices=["awgn", "rayleigh_block"])
    sim.add_argument("--snr", help="SNR grid in dB: 'a:b:step' or 'v1,v2,...'")
    sim.add_argument("--trials", type=int, help="max trials per SNR point")
    sim.add_argument("--max-frame-errors", type=int, dest="max_frame_errors",
                     help="early-stop frame error budget per point")
    sim.add_argument("--detector", choices=["lsd", "exhaustive", "lf"])
    sim.add_argument("--receiver", choices=["single", "multi"])
    sim.add_argument("--list-size", type=int, dest="list_size", help="LSD list size")
    sim.add_argument("--theta", type=float, help="linear-filter regularization")
    sim.add_argument("--code-file", dest="code_file", help="parity-check triplet file")
    sim.add_argument("--code-n", type=int, dest="code_n", help="codeword length")
    sim.add_argument("--code-k", type=int, dest="code_k", help="message length")
    sim.add_argument("--code-seed", type=int, dest="code_seed", help="code construction seed")
    sim.add_argument("--code-profile", dest="code_profile", choices=["regular", "irregular"],
                     help="LDPC degree profile for generated codes")
    sim.add_argument("--spreading-file", dest="spreading_file", help="spreading pattern file")
    sim.add_argument("--spreading-gen", dest="spreading_gen", action="store_true",
                     help="generate a spreading matrix for (K, N_S) before the sweep")
    sim.add_argument("--table2", action="store_true",
                     help="use the bundled 4x10 reference spreading matrix")
    sim.add_argument("--max-stages", type=int, dest="max_stages")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--out", help="output CSV path")

    rates = sub.add_parser("rates", help="estimate symmetric rates over an SNR grid")
    rates.add_argument("--config", help="JSON config file (same keys as sim)")
    rates.add_argument("--q", type=int)
    rates.add_argument("--users", type=int)
    rates.add_argument("--ns", type=int)
    rates.add_argument("--nr", type=int)
    rates.add_argument("--fading", choices=["awgn", "rayleigh_block"])
    rates.add_argument("--snr", help="SNR grid in dB: 'a:b:step' or 'v1,v2,...'")
    rates.add_argument("--spreading-file", dest="spreading_file")
    rates.add_argument("--table2", action="store_true")
    rates.add_argument("--samples", type=int, default=5000, help="Monte Carlo samples per point")
    rates.add_argument("--conditioning", choices=["full_y", "filtered_y"], default="full_y")
    rates.add_argument("--fading-draws", type=int, default=10, dest="fading_draws",
                       help="channel draws averaged per point under fading")
    rates.add_argument("--seed", type=int)
    rates.add_argument("--out", help="output CSV path")

    gen = sub.add_parser("gen-spreading", help="generate a {0,+1,-1} spreading matrix")
    gen.add_argument("--k", type=int, required=True, help="number of users")
    gen.add_argument("--ns", type=int, required=True, help="spreading length")
    gen.add_argument("--q", type=int, default=2)
    gen.add_argument("--rho-design", type=float, default=10.0, dest="rho_design",
                     help="linear SNR used in the rate acceptance check")
    gen.add_argument("--r0", type=float, default=0.0, help="symmetric-rate acceptance target")
    gen.add_argument("--max-attempts", type=int, default=20, dest="max_attempts")
    gen.add_argument("--zero-prob", type=float, default=0.25, dest="zero_prob")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output pattern file")
    return parser


_SIM_FLAGS = (
    "q", "users", "fading", "trials", "max_frame_errors", "detector", "receiver",
    "list_size", "theta", "code_file", "code_n", "code_k", "code_seed",
    "code_profile", "max_stages", "seed", "out",
)


def _sim_config(args) -> ExperimentConfig:
    base = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for name in _SIM_FLAGS:
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    if args.ns is not None:
        overrides["n_s"] = args.ns
    if args.nr is not None:
        overrides["n_r"] = args.nr
    if args.snr is not None:
        overrides["snr_db"] = _parse_snr(args.snr)
    if getattr(args, "table2", False):
        overrides["spreading"] = "table2"
    elif getattr(args, "spreading_file", None):
        overrides["spreading"] = args.spreading_file
    cfg = dataclasses.replace(base, **overrides)
    cfg.validate()
    return cfg


def _cmd_sim(args) -> int:
    cfg = _sim_config(args)
    if getattr(args, "spreading_gen", False):
        sp = generate_spreading(cfg.users, cfg.n_s, cfg.q, seed=cfg.seed)
        path = (cfg.out or "results") + ".spreading.txt"
        save_spreading(sp, path)
        cfg = dataclasses.replace(cfg, spreading=path)
        print(f"generated spreading matrix -> {path}")
    print(f"# {cfg.users} users, q={cfg.q}, N_S={cfg.n_s}, N_R={cfg.n_r}, "
          f"{cfg.fading}, detector={cfg.detector}, receiver={cfg.receiver}")
    print(CSV_FMT.format("snr_db", "trials", "frame_err", "fer", "ber", "mean_rec"))

    def progress(row):
        print(CSV_FMT.format(
            f"{row.snr_db:g}", row.trials_run, row.frame_errors,
            f"{row.fer:.3e}", f"{row.ber:.3e}", f"{row.mean_recovered:.2f}",
        ))

    rows = run_experiment(cfg, progress=progress)
    out = cfg.out or "results.csv"
    emit_csv(rows, out)
    print(f"wrote {out}")
    return 0


CSV_FMT = "{:>8} {:>8} {:>10} {:>12} {:>12} {:>9}"


def _cmd_rates(args) -> int:
    ns = args.ns or 1
    nr = args.nr or 1
    users = args.users or 2
    q = args.q or 2
    fading = args.fading or "awgn"
    seed = args.seed or 0
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
        q, users, ns, nr, fading = cfg.q, cfg.users, cfg.n_s, cfg.n_r, cfg.fading
        seed = cfg.seed
        snr_list = cfg.snr_db
        spreading_name = cfg.spreading
    else:
        snr_list = _parse_snr(args.snr) if args.snr else (0.0, 5.0, 10.0)
        spreading_name = "table2" if args.table2 else getattr(args, "spreading_file", None)
    if args.snr is not None:
        snr_list = _parse_snr(args.snr)
    if spreading_name == "table2":
        spreading = table2_spreading()
    elif spreading_name:
        spreading = load_spreading(spreading_name)
    else:
        spreading = None
        if ns != 1:
            raise ConfigError("n_s > 1 requires a spreading matrix")
    lines = ["snr_db,symmetric_rate,min_user_rate,max_entropy_bits,stderr"]
    rng = np.random.default_rng(seed)
    draws = args.fading_draws if fading == "rayleigh_block" else 1
    print(f"# rates: {users} users, q={q}, N_S={ns}, N_R={nr}, {fading}, "
          f"{args.conditioning}, {args.samples} samples")
    for snr in snr_list:
        rho = 10.0 ** (snr / 10.0)
        rsym, rmin, hmax, se = 0.0, 0.0, 0.0, 0.0
        for _ in range(draws):
            spatial = (np.ones((nr, users)) if fading == "awgn"
                       else rng.standard_normal((nr, users)))
            h = build_h(spreading, spatial, fading, rho)
            sel = select_coefficients(h, users, q)
            est = estimate_rates(h, sel.a_tilde, q, samples=args.samples,
                                 conditioning=args.conditioning, seed=rng)
            rsym += est.symmetric_rate / draws
            rmin += est.per_user_rates.min() / draws
            hmax += est.entropies.max() / draws
            se += est.symmetric_rate_se / draws
        print(f"{snr:8g} dB: R_sym = {rsym:.4f} bits/symbol (+-{se:.4f})")
        lines.append(f"{snr:.12g},{rsym:.12g},{rmin:.12g},{hmax:.12g},{se:.12g}")
    if args.out:
        with open(args.out, "w") as f:
            f.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_gen_spreading(args) -> int:
    sp = generate_spreading(
        args.k, args.ns, q=args.q, rho_design=args.rho_design, r0=args.r0,
        max_attempts=args.max_attempts, seed=args.seed, zero_prob=args.zero_prob,
    )
    save_spreading(sp, args.out)
    if sp.warning:
        print(f"warning: {sp.warning}", file=sys.stderr)
    print(f"wrote {args.out} ({sp.n_s}x{sp.k_users})")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sim":
            return _cmd_sim(args)
        if args.command == "rates":
            return _cmd_rates(args)
        return _cmd_gen_spreading(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
