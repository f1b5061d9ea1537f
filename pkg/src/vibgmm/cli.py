"""Command-line front end.

Subcommands: ``train``, ``cluster``, ``eval``, ``oracle-check``,
``gen-synthetic``. Exit codes are a stable contract: 0 success, 1 for a
failed property or aborted run, 2 for configuration and I/O problems.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import data as data_io
from . import discrete
from .autodiff import NumericsError
from .baselines import em_gmm, kmeans
from .gmm_prior import GmmParams
from .metrics import clustering_accuracy, confusion_matrix, pca_project_2d
from .nn import Decoder, Encoder, LrSchedule
from .training import (
    AnnealSchedule,
    TrainConfig,
    anneal_train,
    assign_clusters,
    init_state,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


_CONFIG_KEYS = {
    # dataset
    "data_path": (str, None),
    "data_format": (str, "vibf"),  # vibf | csv | idx
    "labels_path": (str, ""),  # idx labels file (optional)
    "csv_header": (bool, False),
    "standardize": (bool, False),
    # model
    "n_clusters": (int, None),
    "latent_dim": (int, 2),
    "encoder_hidden": (str, "500,500,2000"),
    "decoder_hidden": (str, "2000,500,500"),
    "decoder_activation": (str, ""),  # sigmoid | linear; default from loss
    "reconstruction": (str, "mean_squared_error"),
    # optimization
    "batch_size": (int, 100),
    "epochs": (int, 1),
    "mc_samples": (int, 1),
    "seed": (int, 0),
    "variance_floor": (float, 1e-6),
    "lr_initial": (float, 0.002),
    "lr_decay": (float, 0.9),
    "lr_interval_epochs": (int, 20),
    "lr_floor": (float, 0.0005),
    # annealing
    "s_min": (float, 1.0),
    "s_max": (float, 5.0),
    "s_step_factor": (float, 0.0),  # 0 means derive geometrically
    "epochs_per_step": (int, 0),  # 0 means derive from total epochs
    "gmm_kmeans_init": (bool, False),
    "gmm_kmeans_init_epoch": (int, 10),
    # output
    "out_dir": (str, "run"),
}

_REQUIRED_KEYS = ("data_path", "n_clusters")


def _parse_bool(v):
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def load_run_config(path) -> dict:
    """Parse the flat key=value config (one per line, '#' comments). Unknown
    keys are rejected; defaulted keys are echoed to stderr."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        typ, _ = _CONFIG_KEYS[key]
        try:
            values[key] = _parse_bool(value) if typ is bool else typ(value)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: cannot parse {value!r} as {typ.__name__} "
                f"for key {key!r}"
            ) from None
    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"config is missing required key {key!r}")
    defaulted = []
    for key, (_, default) in _CONFIG_KEYS.items():
        if key not in values:
            values[key] = default
            defaulted.append(f"{key}={default!r}")
    if defaulted:
        print("defaulted: " + ", ".join(sorted(defaulted)), file=sys.stderr)
    return values


def _parse_dims(text):
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse layer dims from {text!r}") from None


def _load_dataset(cfg) -> data_io.Dataset:
    fmt = cfg["data_format"]
    path = cfg["data_path"]
    try:
        if fmt == "idx":
            return data_io.load_idx(path, cfg["labels_path"] or None)
        return data_io.load_feature_matrix(
            path, fmt, header=cfg["csv_header"], scale=cfg["standardize"]
        )
    except (OSError, data_io.ParseError, ValueError) as e:
        raise ConfigError(f"cannot load dataset {path}: {e}") from None


def _build_models(cfg, n_x, rng):
    dec_act = cfg["decoder_activation"] or (
        "sigmoid" if cfg["reconstruction"] == "bernoulli_cross_entropy" else "linear"
    )
    encoder = Encoder(n_x, _parse_dims(cfg["encoder_hidden"]), cfg["latent_dim"],
                      rng, variance_floor=cfg["variance_floor"])
    decoder = Decoder(cfg["latent_dim"], _parse_dims(cfg["decoder_hidden"]), n_x,
                      rng, output_activation=dec_act)
    gmm = GmmParams.random_init(cfg["n_clusters"], cfg["latent_dim"], rng)
    return encoder, decoder, gmm, dec_act


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(
        batch_size=cfg["batch_size"],
        mc_samples=cfg["mc_samples"],
        epochs=cfg["epochs"],
        seed=cfg["seed"],
        variance_floor=cfg["variance_floor"],
        reconstruction=cfg["reconstruction"],
        lr=LrSchedule(cfg["lr_initial"], cfg["lr_decay"],
                      cfg["lr_interval_epochs"], cfg["lr_floor"]),
        gmm_kmeans_init=cfg["gmm_kmeans_init"],
        gmm_kmeans_init_epoch=cfg["gmm_kmeans_init_epoch"],
    )


def _anneal_schedule(cfg) -> AnnealSchedule:
    return AnnealSchedule(
        s_min=cfg["s_min"],
        s_max=cfg["s_max"],
        step_factor=cfg["s_step_factor"] or None,
        epochs_per_step=cfg["epochs_per_step"] or None,
    )


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    dataset = _load_dataset(cfg)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    init_rng = np.random.default_rng(
        np.random.SeedSequence(cfg["seed"]).spawn(3)[2]
    )
    encoder, decoder, gmm, dec_act = _build_models(cfg, dataset.n_x, init_rng)
    config = _train_config(cfg)
    schedule = _anneal_schedule(cfg)
    state = init_state(encoder, decoder, gmm, config)

    log_path = out_dir / "train_log.jsonl"
    with open(log_path, "w") as log_file:

        def log_fn(stats):
            line = json.dumps(stats.to_dict())
            log_file.write(line + "\n")
            print(line)

        anneal_train(dataset.train_view(), state, config, schedule, log_fn=log_fn)

    tensors = {}
    tensors.update(encoder.named_tensors("encoder"))
    tensors.update(decoder.named_tensors("decoder"))
    tensors.update(gmm.named_tensors())
    ckpt.save_tensors(out_dir / "checkpoint.vibw",
                      {k: t.data for k, t in tensors.items()})
    sidecar = {
        "n_x": dataset.n_x,
        "latent_dim": cfg["latent_dim"],
        "n_clusters": cfg["n_clusters"],
        "encoder_hidden": _parse_dims(cfg["encoder_hidden"]),
        "decoder_hidden": _parse_dims(cfg["decoder_hidden"]),
        "decoder_activation": dec_act,
        "config": {
            "batch_size": config.batch_size,
            "mc_samples": config.mc_samples,
            "epochs": config.epochs,
            "seed": config.seed,
            "variance_floor": config.variance_floor,
            "reconstruction": config.reconstruction,
            "lr": vars(config.lr),
        },
        "schedule": {
            "s_min": schedule.s_min,
            "s_max": schedule.s_max,
            "step_factor": schedule.step_factor,
            "epochs_per_step": schedule.epochs_per_step,
        },
    }
    (out_dir / "checkpoint.json").write_text(json.dumps(sidecar, indent=2))

    last = state.history[-1]
    print(json.dumps({
        "epochs": len(state.history),
        "final_s": last.s,
        "final_losses": {"recon": last.recon, "kl": last.kl, "total": last.total},
        "checkpoint": str(out_dir / "checkpoint.vibw"),
        "log": str(log_path),
    }))
    return EXIT_OK


def load_model(checkpoint_path):
    """Rebuild encoder/decoder/mixture from a checkpoint and its sidecar."""
    path = Path(checkpoint_path)
    if path.is_dir():
        path = path / "checkpoint.vibw"
    sidecar_path = path.with_suffix(".json")
    try:
        meta = json.loads(sidecar_path.read_text())
        tensors = ckpt.load_tensors(path)
    except (OSError, json.JSONDecodeError, ckpt.CheckpointError) as e:
        raise ConfigError(f"cannot load checkpoint {path}: {e}") from None

    rng = np.random.default_rng(0)
    encoder = Encoder(meta["n_x"], meta["encoder_hidden"], meta["latent_dim"], rng,
                      variance_floor=meta["config"]["variance_floor"])
    decoder = Decoder(meta["latent_dim"], meta["decoder_hidden"], meta["n_x"], rng,
                      output_activation=meta["decoder_activation"])
    gmm = GmmParams.random_init(meta["n_clusters"], meta["latent_dim"], rng)
    named = {}
    named.update(encoder.named_tensors("encoder"))
    named.update(decoder.named_tensors("decoder"))
    named.update(gmm.named_tensors())
    for name, tensor in named.items():
        if name not in tensors:
            raise ConfigError(f"checkpoint is missing tensor {name!r}")
        if tensors[name].shape != tensor.data.shape:
            raise ConfigError(
                f"checkpoint tensor {name!r} has shape {tensors[name].shape}, "
                f"expected {tensor.data.shape}"
            )
        tensor.data = tensors[name]
    return encoder, decoder, gmm, meta


def _load_features_arg(args) -> data_io.Dataset:
    fmt = args.format
    try:
        if fmt == "idx":
            return data_io.load_idx(args.data, getattr(args, "labels", None) or None)
        return data_io.load_feature_matrix(args.data, fmt,
                                           header=getattr(args, "csv_header", False))
    except (OSError, data_io.ParseError, ValueError) as e:
        raise ConfigError(f"cannot load dataset {args.data}: {e}") from None


def cmd_cluster(args) -> int:
    dataset = _load_features_arg(args)
    if args.algo == "vibgmm":
        if not args.checkpoint:
            raise ConfigError("--checkpoint is required for --algo vibgmm")
        encoder, _, gmm, meta = load_model(args.checkpoint)
        if dataset.n_x != meta["n_x"]:
            raise ConfigError(
                f"dataset width {dataset.n_x} does not match the checkpoint; "
                f"expected n_x={meta['n_x']}"
            )
        labels = assign_clusters(dataset.train_view(), encoder, gmm,
                                 floor=meta["config"]["variance_floor"])
    elif args.algo == "kmeans":
        labels = kmeans(dataset.train_view(), args.k, seed=args.seed).assignments
    elif args.algo == "gmm":
        labels = em_gmm(dataset.train_view(), args.k, seed=args.seed).hard_labels()
    else:
        raise ConfigError(f"unknown algorithm {args.algo!r}")
    out = Path(args.out)
    out.write_text("".join(f"{int(l)}\n" for l in labels))
    print(json.dumps({"n": int(len(labels)), "labels": str(out)}))
    return EXIT_OK


def _read_labels(path):
    try:
        lines = Path(path).read_text().split()
    except OSError as e:
        raise ConfigError(f"cannot read labels {path}: {e}") from None
    try:
        return np.array([int(t) for t in lines], dtype=np.int64)
    except ValueError:
        raise ConfigError(f"non-integer label in {path}") from None


def cmd_eval(args) -> int:
    pred = _read_labels(args.pred)
    truth = _read_labels(args.truth)
    if len(pred) != len(truth):
        raise ConfigError(
            f"label files disagree in length: {len(pred)} vs {len(truth)}"
        )
    counts = confusion_matrix(pred, truth)
    result = {
        "acc": clustering_accuracy(pred, truth),
        "n": int(len(pred)),
        "k_pred": int(counts.shape[0]),
        "k_true": int(counts.shape[1]),
        "confusion": counts.tolist(),
    }
    if args.emit_projection:
        if not (args.checkpoint and args.data):
            raise ConfigError("--emit-projection needs --checkpoint and --data")
        dataset = _load_features_arg(args)
        encoder, _, _, _ = load_model(args.checkpoint)
        latents = encoder.encode(dataset.train_view()).mean.data
        proj = pca_project_2d(latents)
        with open(args.emit_projection, "w") as f:
            f.write("x,y,pred,true\n")
            for (x, y), p, t in zip(proj.coords, pred, truth):
                f.write(f"{x:.8g},{y:.8g},{int(p)},{int(t)}\n")
        result["captured_variance"] = proj.captured_variance
        result["projection"] = args.emit_projection
    print(json.dumps(result))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    if args.inject_invalid:
        bad = discrete.DiscreteModel(
            p_cx=[[0.25, 0.25], [0.25, 0.25]],
            p_u_given_x=[[0.5, 0.5], [0.5, 0.5]],
            q_x_given_u=[[0.5, 0.5], [0.5, 0.5]],
            q_u=[0.7, 0.7],  # deliberately unnormalized
        )
        try:
            bad.validate()
        except discrete.ValidationError as e:
            print(json.dumps({"all_passed": False, "validation_error": str(e)}))
            return EXIT_FAILURE
        print(json.dumps({"all_passed": False,
                          "validation_error": "broken table was not rejected"}))
        return EXIT_FAILURE
    report = discrete.oracle_check(seed=args.seed, trials=args.trials)
    print(json.dumps(report))
    return EXIT_OK if report["all_passed"] else EXIT_FAILURE


def cmd_gen_synthetic(args) -> int:
    rng = np.random.default_rng(args.seed)
    means = args.spread * rng.standard_normal((args.k, args.dim))
    spec = data_io.SyntheticGmmSpec(
        k=args.k,
        d=args.dim,
        means=means,
        variances=np.full((args.k, args.dim), args.variance),
        weights=np.full(args.k, 1.0 / args.k),
        n=args.n,
        seed=args.seed,
    )
    ds = data_io.generate_synthetic(spec)
    out = Path(args.out)
    if args.format == "vibf":
        data_io.save_vibf(out, ds.features, ds.labels)
    else:
        with open(out, "w") as f:
            for row, label in zip(ds.features, ds.labels):
                f.write(",".join(f"{v:.10g}" for v in row) + f",{int(label)}\n")
    labels_out = args.labels_out or str(out) + ".labels"
    Path(labels_out).write_text("".join(f"{int(l)}\n" for l in ds.labels))
    print(json.dumps({"n": ds.n, "n_x": ds.n_x, "data": str(out),
                      "labels": labels_out}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibgmm",
        description="Unsupervised clustering with an annealed variational "
                    "information bottleneck over a Gaussian-mixture prior.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a key=value config file")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("cluster", help="write one predicted label per line")
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="vibf", choices=("vibf", "csv", "idx"))
    p.add_argument("--csv-header", action="store_true", dest="csv_header")
    p.add_argument("--algo", default="vibgmm", choices=("vibgmm", "kmeans", "gmm"))
    p.add_argument("--checkpoint", default="")
    p.add_argument("--k", type=int, default=2, help="clusters for the baselines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_cluster)

    p = sub.add_parser("eval", help="score predicted labels against the truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--emit-projection", default="", dest="emit_projection")
    p.add_argument("--checkpoint", default="")
    p.add_argument("--data", default="")
    p.add_argument("--format", default="vibf", choices=("vibf", "csv", "idx"))
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("oracle-check",
                       help="exact finite-alphabet property suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--inject-invalid", action="store_true",
                   help="self-test: feed a broken table to the validator")
    p.set_defaults(fn=cmd_oracle_check)

    p = sub.add_parser("gen-synthetic", help="sample a labeled mixture dataset")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spread", type=float, default=5.0)
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--format", default="vibf", choices=("vibf", "csv"))
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out", default="", dest="labels_out")
    p.set_defaults(fn=cmd_gen_synthetic)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as e:
        print(f"aborted: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
