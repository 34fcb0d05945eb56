"""
Interface en ligne de commande.

Sous-commandes : train-target, gen-fq-data, train-fq, gamma-search, attack,
evaluate, verify-theory. Toute erreur du domaine (PredCoinError) est
affichée avec ❌ et donne le code de sortie 1.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

sys.path.insert(0, str(Path(__file__).parent.parent))
from config.settings import (
    ADAPTIVE_CONFIG, DEFENSE_CONFIG, EXPERIMENT_CONFIG, MNIST_FILES, MODELS_DIR,
    REPORTS_DIR, TARGET_ARCH, TRAIN_CONFIG,
)
from src.adaptive.bypass import make_bypass_estimator
from src.adaptive.uncertainty import UncertaintyAwareOracle
from src.attacks import ATTACKS, get_attack
from src.attacks.primitives import AttackConfig
from src.data.idx_loader import load_mnist
from src.data.preprocessing import correctly_classified, make_blobs
from src.defense.detector import (
    FQDataset, FQTrainConfig, SamplerConfig, generate_fq_dataset, train_fq,
)
from src.defense.gamma import gamma_search, gamma_sweep
from src.defense.predcoin import DefenseConfig, DefenseState, FlipMode
from src.evaluation.campaign import DatasetSpec, ExperimentConfig, run_campaign
from src.models.serialization import load_model, save_model
from src.models.trainer import ClassifierTrainer, TrainConfig, accuracy
from src.oracle.oracles import HardLabelOracle
from src.theory.verification import (
    beta_projection_check, convergence_experiment, flip_collapse_experiment,
)
from src.utils.errors import ConfigError, EmptyDatasetError, PredCoinError
from src.utils.logger import setup_logging

logger = logging.getLogger(__name__)

BLOBS_HIDDEN = 32


def _int_list(value: str) -> List[int]:
    try:
        values = [int(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"liste d'entiers attendue: {value}") from e
    if not values:
        raise argparse.ArgumentTypeError("liste d'entiers vide")
    return values


def _float_list(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"liste de réels attendue: {value}") from e


def _read_config(args) -> dict:
    if not args.config:
        return {}
    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"fichier de configuration introuvable: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON invalide ({path}): {e}") from e


def _write_json(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


def _load_data(args):
    """(train, test) : MNIST (fichiers IDX) ou blobs synthétiques découpés 80/20"""
    if args.data == "mnist":
        return load_mnist(MNIST_FILES, EXPERIMENT_CONFIG["train_limit"], EXPERIMENT_CONFIG["test_limit"])
    blobs = make_blobs(args.blobs_per_class, args.blobs_dim, seed=args.data_seed)
    return blobs.split(0.2, args.data_seed)


def _dataset_spec(args) -> DatasetSpec:
    if args.data == "mnist":
        return DatasetSpec(kind="idx", images_path=str(MNIST_FILES["test_images"]),
                           labels_path=str(MNIST_FILES["test_labels"]),
                           limit=EXPERIMENT_CONFIG["test_limit"])
    return DatasetSpec(kind="blobs", n_per_class=args.blobs_per_class, dim=args.blobs_dim,
                       seed=args.data_seed)


def _require_defense_config(args) -> None:
    if args.defense not in (None, "none") and not args.defense_config:
        raise ConfigError("--defense demande --defense-config")


def _defense_state(args, target=None) -> Optional[DefenseState]:
    _require_defense_config(args)
    if not args.defense_config:
        return None
    dc = DefenseConfig.load(Path(args.defense_config))
    mode = FlipMode.from_cli(args.defense) if args.defense else dc.mode
    if mode is FlipMode.OFF:
        return None
    target = target if target is not None else load_model(Path(dc.target_path))
    return DefenseState(target, load_model(Path(dc.fq_path)), dc.gamma, mode, args.seed)


# ─────────────────────────────────────────────────────────────────────────────
# Sous-commandes
# ─────────────────────────────────────────────────────────────────────────────

def cmd_train_target(args) -> int:
    train, test = _load_data(args)
    arch = TARGET_ARCH if args.data == "mnist" else [train.dim, BLOBS_HIDDEN, 2]
    cfg = TrainConfig.build(**{**TRAIN_CONFIG, **_read_config(args), "seed": args.seed})
    net, history = ClassifierTrainer(cfg).train(train, arch)
    test_acc = accuracy(net, test) if len(test) else None
    path = save_model(net, Path(args.out) / "target.pcnn", {
        "train_accuracy": history["accuracy"][-1],
        "test_accuracy": test_acc,
        "data": args.data,
        "seed": args.seed,
    })
    print(f"✅ Cible entraînée: {path} (accuracy test: {test_acc})")
    return 0


def cmd_gen_fq_data(args) -> int:
    target = load_model(Path(args.target))
    train, _ = _load_data(args)
    base = correctly_classified(target, train)
    if args.limit:
        base = base.head(args.limit)
    try:
        cfg = SamplerConfig(**_read_config(args))
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    ds = generate_fq_dataset(target, base, cfg, np.random.default_rng(args.seed))
    path = ds.save(Path(args.out) / "fq_data.npz")
    print(f"✅ Jeu F_Q: {len(ds)} exemples ({ds.n_skipped} entrées ignorées) -> {path}")
    return 0


def cmd_train_fq(args) -> int:
    data = FQDataset.load(Path(args.fq_data))
    cfg = FQTrainConfig.build(**{**TRAIN_CONFIG, **_read_config(args), "seed": args.seed})
    net, metrics = train_fq(data, cfg)
    out = Path(args.out)
    path = save_model(net, out / "fq.pcnn", {"holdout": metrics.to_dict(), "seed": args.seed})
    _write_json(out / "fq_metrics.json", metrics.to_dict())
    print(f"✅ F_Q entraîné: {path}")
    print(f"📊 accuracy={metrics.accuracy:.4f} FP={metrics.fp_rate:.4f} FN={metrics.fn_rate:.4f}")
    return 0


def cmd_gamma_search(args) -> int:
    target = load_model(Path(args.target))
    fq = load_model(Path(args.fq))
    _, validation = _load_data(args)
    mode = FlipMode.from_cli(args.defense) if args.defense else FlipMode.PROBABILISTIC
    state = DefenseState(target, fq, DEFENSE_CONFIG["gamma"], mode, args.seed)
    out = Path(args.out)

    result = gamma_search(state, validation, acc_loss_cap=args.cap)
    if not result.feasible:
        print(f"⚠️ Aucun gamma ne respecte le plafond {args.cap}, gamma = 1 (défense inactive)")
    dc = DefenseConfig(gamma=result.gamma, mode=mode, fq_path=str(Path(args.fq).resolve()),
                       target_path=str(Path(args.target).resolve()), seed=args.seed)
    dc.save(out / "defense.json")
    print(f"✅ gamma = {result.gamma:.4f} ({result.iterations} itérations)")

    if args.sweep:
        frame = gamma_sweep(state, validation, np.round(np.linspace(0.0, 1.0, 21), 2))
        frame.to_csv(out / "gamma_sweep.csv", index=False)
        print(f"📊 Balayage gamma écrit: {out / 'gamma_sweep.csv'}")
    return 0


def cmd_attack(args) -> int:
    _require_defense_config(args)
    target = load_model(Path(args.target))
    _, test = _load_data(args)
    seeds = correctly_classified(target, test)
    if args.index >= len(seeds):
        raise EmptyDatasetError(f"index {args.index} hors des {len(seeds)} entrées bien classées")
    x_star, c_star = seeds.X[args.index], int(seeds.y[args.index])

    defense = _defense_state(args, target)
    if defense is None:
        oracle = HardLabelOracle(target)
    else:
        oracle = HardLabelOracle(defense=defense, rng=np.random.default_rng([args.seed, 1]))
    attacked, kwargs = oracle, {}
    if args.adaptive != "none" and defense is None:
        raise ConfigError("une attaque adaptative demande une défense (--defense-config)")
    if args.adaptive == "uncertainty":
        attacked = UncertaintyAwareOracle(oracle, args.k, args.vote)
    elif args.adaptive == "bypass":
        if args.attack != "hsja":
            raise ConfigError("l'attaque de contournement ne s'applique qu'à HSJA")
        kwargs["gradient_estimator"] = make_bypass_estimator(defense)

    cfg = AttackConfig.build(norm=args.norm, query_budget=args.budget[0], seed=args.seed)
    result = get_attack(args.attack)(attacked, x_star, c_star, cfg, **kwargs)
    payload = {
        "attack": args.attack, "norm": args.norm, "budget": args.budget[0], "index": args.index,
        "success": result.success, "l2": result.l2_dist if result.success else None,
        "linf": result.linf_dist if result.success else None,
        "queries": oracle.query_count, "flags": oracle.flag_count, "seed": args.seed,
    }
    _write_json(Path(args.out) / "attack_result.json", payload)
    status = "✅" if result.success else "⚠️"
    print(f"{status} {args.attack}/{args.norm}: succès={result.success} "
          f"l2={result.l2_dist:.4f} linf={result.linf_dist:.4f} requêtes={oracle.query_count}")
    return 0


def cmd_evaluate(args) -> int:
    if args.config:
        cfg = ExperimentConfig.load(Path(args.config))
    else:
        if not args.target:
            raise ConfigError("--target ou --config requis")
        _require_defense_config(args)
        budgets = EXPERIMENT_CONFIG["full_budgets"] if args.full_budgets else args.budget
        defense_path = args.defense_config if args.defense != "none" else None
        cfg = ExperimentConfig.build(
            dataset=_dataset_spec(args).model_dump(),
            target_path=args.target,
            defense_path=defense_path,
            defense_mode=FlipMode.from_cli(args.defense) if args.defense and defense_path else None,
            attack=args.attack,
            norm=args.norm,
            budgets=budgets,
            n_seed_images=args.n_seed_images,
            base_seed=args.seed,
            output_dir=args.out,
            adaptive=args.adaptive,
            k=args.k,
            vote=args.vote,
            repeats=args.repeats,
            workers=args.workers,
        )
    if args.full_budgets:
        cfg = cfg.model_copy(update={"budgets": list(EXPERIMENT_CONFIG["full_budgets"])})
    report = run_campaign(cfg)
    print(f"✅ Rapport: {Path(cfg.output_dir) / 'report.json'}")
    for arm, cells in report.aggregates["median"].items():
        for budget, value in cells.items():
            print(f"📊 {arm} budget={budget}: médiane {cfg.norm} = {value}")
    return 0


def cmd_verify_theory(args) -> int:
    out = Path(args.out)
    report = convergence_experiment(args.d, args.delta, args.B, seed=args.seed, workers=args.workers)
    report.to_csv(out / "convergence.csv")

    collapse = flip_collapse_experiment(args.collapse_d, args.delta[0], args.collapse_B,
                                        args.trials, seed=args.seed)
    betas = [beta_projection_check(d, args.beta_samples, seed=args.seed) for d in args.d]
    _write_json(out / "flip_collapse.json", collapse.__dict__)
    _write_json(out / "beta_projection.json", {str(b.d): b.__dict__ for b in betas})

    status = "✅" if report.all_passed and all(b.passed for b in betas) else "❌"
    print(f"{status} convergence: {sum(r.passed for r in report.rows)}/{len(report.rows)} lignes valides")
    print(f"📊 effondrement: cos moyen {collapse.mean_cos:.4f}, norme {collapse.mean_norm:.5f} "
          f"(référence {collapse.baseline_se:.5f})")
    return 0 if status == "✅" else 1


# ─────────────────────────────────────────────────────────────────────────────
# Parseur
# ─────────────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="fichier JSON de configuration")
    common.add_argument("--seed", type=int, default=0, help="graine (entier 64 bits)")
    common.add_argument("--out", default=str(REPORTS_DIR), help="répertoire de sortie")
    common.add_argument("--log-level", default=None)
    common.add_argument("--workers", type=int, default=1)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", choices=["blobs", "mnist"], default="blobs")
    data.add_argument("--blobs-dim", type=int, default=2)
    data.add_argument("--blobs-per-class", type=int, default=200)
    data.add_argument("--data-seed", type=int, default=0)

    attack = argparse.ArgumentParser(add_help=False)
    attack.add_argument("--target", default=str(MODELS_DIR / "target.pcnn"))
    attack.add_argument("--defense-config", default=None, help="defense.json (gamma-search)")
    attack.add_argument("--defense", choices=["none", "prob", "parity"], default=None)
    attack.add_argument("--attack", choices=list(ATTACKS), default="hsja")
    attack.add_argument("--adaptive", choices=["none", "bypass", "uncertainty"], default="none")
    attack.add_argument("--k", type=int, default=ADAPTIVE_CONFIG["k"])
    attack.add_argument("--vote", choices=["majority", "consensus"], default=ADAPTIVE_CONFIG["vote"])
    attack.add_argument("--norm", choices=["l2", "linf"], default="l2")
    attack.add_argument("--budget", type=_int_list, default=list(EXPERIMENT_CONFIG["budgets"]))

    parser = argparse.ArgumentParser(prog="predcoin", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-target", parents=[common, data], help="entraîne la cible")
    p.set_defaults(func=cmd_train_target)

    p = sub.add_parser("gen-fq-data", parents=[common, data], help="génère le jeu F_Q")
    p.add_argument("--target", default=str(MODELS_DIR / "target.pcnn"))
    p.add_argument("--limit", type=int, default=None, help="nombre d'entrées de base")
    p.set_defaults(func=cmd_gen_fq_data)

    p = sub.add_parser("train-fq", parents=[common], help="entraîne le détecteur F_Q")
    p.add_argument("--fq-data", required=True)
    p.set_defaults(func=cmd_train_fq)

    p = sub.add_parser("gamma-search", parents=[common, data], help="recherche du seuil gamma")
    p.add_argument("--target", default=str(MODELS_DIR / "target.pcnn"))
    p.add_argument("--fq", default=str(MODELS_DIR / "fq.pcnn"))
    p.add_argument("--defense", choices=["prob", "parity"], default=None)
    p.add_argument("--cap", type=float, default=DEFENSE_CONFIG["acc_loss_cap"])
    p.add_argument("--sweep", action="store_true", help="écrit aussi gamma_sweep.csv")
    p.set_defaults(func=cmd_gamma_search)

    p = sub.add_parser("attack", parents=[common, data, attack], help="une attaque sur une entrée")
    p.add_argument("--index", type=int, default=0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("evaluate", parents=[common, data, attack], help="campagne d'évaluation")
    p.add_argument("--n-seed-images", type=int, default=EXPERIMENT_CONFIG["n_seed_images"])
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--full-budgets", action="store_true", help="budgets 30K/50K")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify-theory", parents=[common], help="vérifications sur oracles analytiques")
    p.add_argument("--d", type=_int_list, default=[5, 20])
    p.add_argument("--delta", type=_float_list, default=[1e-2, 1e-3])
    p.add_argument("--B", type=int, default=20_000)
    p.add_argument("--collapse-d", type=int, default=20)
    p.add_argument("--collapse-B", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--beta-samples", type=int, default=100_000)
    p.set_defaults(func=cmd_verify_theory)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except PredCoinError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"❌ {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
