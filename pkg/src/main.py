"""Startpunkt fuer das Strichartz-Labor (Kommandozeile)."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import re
import sys
from importlib import metadata
from pathlib import Path
from typing import Any

# Stellt sicher, dass der Projektpfad fuer direkte Starts verfuegbar ist.
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.core.config import DEFAULT_CONFIG_PATH, Config, RunConfig
from src.core.errors import AcceptanceFailure, InvalidParameterError, LabError
from src.core.pipeline import COMMANDS, SCENARIOS, run_scenario
from src.utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ACCEPTANCE = 2


def _extract_requirement_name(line: str) -> str | None:
    """Extrahiert den Paketnamen aus einer requirements-Zeile."""
    cleaned = line.split("#", 1)[0].strip()
    if not cleaned:
        return None
    cleaned = cleaned.split(";", 1)[0].strip()
    if not cleaned:
        return None
    name = re.split(r"[<>=!~ ]", cleaned, maxsplit=1)[0].strip()
    if "[" in name:
        name = name.split("[", 1)[0].strip()
    return name or None


def _find_missing_requirements(requirements_path: Path) -> list[str]:
    """Sammelt fehlende Pakete aus der requirements-Datei."""
    missing: list[str] = []
    if not requirements_path.exists():
        return missing
    for line in requirements_path.read_text(encoding="utf-8").splitlines():
        name = _extract_requirement_name(line)
        if not name:
            continue
        try:
            metadata.version(name)
        except metadata.PackageNotFoundError:
            missing.append(name)
    return missing


def parse_int_list(text: str) -> list[int]:
    """'8,16,32' oder dyadisch '8..512'."""
    text = text.strip()
    if ".." in text:
        start, stop = (int(part) for part in text.split("..", 1))
        if start < 1 or stop < start:
            raise argparse.ArgumentTypeError(f"Ungueltiger Bereich: {text}")
        values = [start]
        while values[-1] * 2 <= stop:
            values.append(values[-1] * 2)
        return values
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"Erwartet ganze Zahlen, erhielt {text!r}") from exc


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"Erwartet Zahlen, erhielt {text!r}") from exc


def parse_param(text: str) -> tuple[str, Any]:
    """'key=value' mit numerischem Wert oder Zahlenliste."""
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"Parameter muss key=value sein, erhielt {text!r}")
    key, value = text.split("=", 1)
    numbers = parse_float_list(value)
    return key.strip(), numbers[0] if len(numbers) == 1 else tuple(numbers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strichartz-lab", description="Numerische Werkbank fuer Strichartz-Abschaetzungen.")
    parser.add_argument("--config", type=Path, default=DEFAULT_CONFIG_PATH, help="YAML-Konfiguration.")
    parser.add_argument("--seed", type=int, help="Ensemble-Seed (ueberschreibt die Konfiguration).")
    parser.add_argument("--out", type=Path, help="Ausgabeordner fuer Reports.")
    parser.add_argument("--threads", type=int, help="Groesse des Worker-Pools.")
    parser.add_argument("--format", choices=("csv", "json"), dest="report_format", help="Reportformat.")
    parser.add_argument("--accept", type=lambda text: [item for item in text.split(",") if item], help="Akzeptanztests, kommagetrennt.")
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--log-dir", default="logs")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_arg(command: argparse.ArgumentParser) -> None:
        command.add_argument("--scenario", choices=sorted(SCENARIOS), default=None)

    cmd = sub.add_parser("evolve", help="Feld linear entwickeln.")
    scenario_arg(cmd)
    cmd.add_argument("--N", type=float, default=8.0)
    cmd.add_argument("--t", type=float, default=1.0)
    cmd.add_argument("--field", default=None, help="Felddatei statt Zufallsfeld.")

    cmd = sub.add_parser("ratio-sweep", help="Strichartz-Quotienten ueber N.")
    scenario_arg(cmd)
    cmd.add_argument("--N", type=parse_int_list, default=None)
    cmd.add_argument("--extremize", action="store_true")

    cmd = sub.add_parser("compare", help="Vergleichstabelle der Geometrien.")
    cmd.add_argument("--N", type=parse_int_list, default=None)
    cmd.add_argument("--scenarios", type=lambda text: text.split(","), default=None)

    cmd = sub.add_parser("quadform", help="Quadrilinearform und A1/A2-Zerlegung.")
    cmd.add_argument("--N", type=float, default=2.0)
    cmd.add_argument("--support", type=int, default=24)
    cmd.add_argument("--c-a", type=parse_float_list, default=None, dest="c_a_sweep")

    cmd = sub.add_parser("measure", help="Masse einer Katalog- oder Dateimenge.")
    cmd.add_argument("--set", dest="set_id", default=None)
    cmd.add_argument("--set-file", default=None)
    cmd.add_argument("--C0", type=float, default=None)
    cmd.add_argument("--param", type=parse_param, action="append", default=[])
    cmd.add_argument("--N", type=parse_int_list, default=None)
    cmd.add_argument("--lam", type=float, default=None)

    cmd = sub.add_parser("regions", help="(alpha, beta)-Regionen gegen |cd|.")
    cmd.add_argument("--kind", choices=("est11", "est21"), required=True)
    cmd.add_argument("--cd", type=parse_float_list, default=[1.0, 10.0, 100.0, 1000.0])

    cmd = sub.add_parser("lemma-corpus", help="Lemma-Check ueber das Mengenkorpus.")
    cmd.add_argument("--count", type=int, default=None)
    cmd.add_argument("--lambdas", type=parse_float_list, default=None)

    cmd = sub.add_parser("prop-check", help="Supremum der Schnittmasse.")
    cmd.add_argument("--kind", choices=("a1", "a2_plain", "a2_refined"), required=True)
    cmd.add_argument("--lam", type=float, default=None)
    cmd.add_argument("--count", type=int, default=24)
    cmd.add_argument("--v-max", type=float, default=1000.0)

    cmd = sub.add_parser("bilinear-sweep", help="Bilineare Quotienten und Skalierungsfit.")
    cmd.add_argument("--N1", type=parse_int_list, default=None)
    cmd.add_argument("--N2", type=parse_int_list, default=None)
    cmd.add_argument("--lambdas", type=parse_float_list, default=None)
    cmd.add_argument("--ensemble", type=int, default=None)
    cmd.add_argument("--eab-samples", type=int, default=0)

    cmd = sub.add_parser("eab", help="Resonanzmass E_{a,b}.")
    cmd.add_argument("--N1", type=parse_int_list, default=None)
    cmd.add_argument("--N2", type=parse_int_list, default=None)
    cmd.add_argument("--lambdas", type=parse_float_list, default=None)
    cmd.add_argument("--count", type=int, default=8)

    cmd = sub.add_parser("extremize", help="Extremierersuche.")
    scenario_arg(cmd)
    cmd.add_argument("--N", type=parse_int_list, default=None)

    cmd = sub.add_parser("nls", help="Kubische NLS mit Strang-Splitting.")
    cmd.add_argument("--N", type=float, default=16.0)
    cmd.add_argument("--intervals", type=int, default=None)
    cmd.add_argument("--amplitude", type=float, default=None)
    cmd.add_argument("--order-check", action="store_true")

    cmd = sub.add_parser("picard", help="Picard-Iteration auf [-1, 1].")
    cmd.add_argument("--N", type=float, default=16.0)
    cmd.add_argument("--amplitude", type=float, default=None)
    cmd.add_argument("--max-iter", type=int, default=None)

    cmd = sub.add_parser("calibrate", help="Kleinheitsschranke per Bisektion.")
    cmd.add_argument("--N", type=float, default=8.0)
    cmd.add_argument("--rounds", type=int, default=12)
    cmd.add_argument("--persist", action="store_true", help="Schranke als nls.smallness in die Konfiguration schreiben.")

    cmd = sub.add_parser("gate", help="Box-Verdopplungstest.")
    scenario_arg(cmd)
    cmd.add_argument("--N", type=float, default=32.0)
    cmd.add_argument("--quantity", choices=("single-mode", "ensemble-max", "extremized"), default="ensemble-max")
    cmd.add_argument("--L", type=float, default=None, dest="box_length", help="Box ohne Kriterium (Negativkontrolle).")
    return parser


def command_params(args: argparse.Namespace, config: RunConfig) -> dict[str, Any]:
    """Uebersetzt die Argumente eines Unterkommandos in Parameter fuer run_scenario."""
    scenario = getattr(args, "scenario", None) or config.harness.scenario
    n_list = getattr(args, "N", None)
    command = args.command
    if command == "evolve":
        return {"scenario_id": scenario, "n": args.N, "t": args.t, "field_path": args.field}
    if command == "ratio-sweep":
        return {"scenario_id": scenario, "n_list": n_list or config.lattice.n_list, "extremize": args.extremize}
    if command == "compare":
        params: dict[str, Any] = {"n_list": n_list or config.lattice.n_list}
        if args.scenarios:
            params["scenario_ids"] = args.scenarios
        return params
    if command == "quadform":
        return {"n": args.N, "support": args.support, "c_a_sweep": args.c_a_sweep}
    if command == "measure":
        params = dict(args.param)
        if args.C0 is not None:
            params["c0"] = args.C0
        return {"set_id": args.set_id, "params": params, "n_list": n_list, "lam": args.lam, "set_file": args.set_file}
    if command == "regions":
        return {"kind": args.kind, "cd_values": args.cd}
    if command == "lemma-corpus":
        return {"count": args.count, "lambdas": args.lambdas}
    if command == "prop-check":
        return {"kind": args.kind, "lam": args.lam, "count": args.count, "v_max": args.v_max}
    if command == "bilinear-sweep":
        return {
            "n1_list": args.N1, "n2_list": args.N2, "lambda_list": args.lambdas,
            "ensemble_size": args.ensemble, "eab_samples": args.eab_samples,
        }
    if command == "eab":
        return {"n1_list": args.N1, "n2_list": args.N2, "lambda_list": args.lambdas, "count": args.count}
    if command == "extremize":
        return {"scenario_id": scenario, "n_list": n_list or config.lattice.n_list}
    if command == "nls":
        return {"n": args.N, "intervals": args.intervals, "amplitude": args.amplitude, "order_check": args.order_check}
    if command == "picard":
        return {"n": args.N, "amplitude": args.amplitude, "max_iter": args.max_iter}
    if command == "calibrate":
        return {"n": args.N, "rounds": args.rounds}
    if command == "gate":
        return {"scenario_id": scenario, "n": args.N, "quantity": args.quantity, "box_length": args.box_length}
    raise InvalidParameterError(f"Unbekanntes Kommando '{command}'.")


def apply_cli_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """CLI-Flags haben Vorrang vor Umgebung und Datei."""
    changes: dict[str, Any] = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = str(args.out)
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.report_format is not None:
        changes["report_format"] = args.report_format
    if args.accept is not None:
        changes["acceptance"] = args.accept
    updated = dataclasses.replace(config, harness=dataclasses.replace(config.harness, **changes))
    updated.validate()
    return updated


def main(argv: list[str] | None = None) -> int:
    """Parst die Argumente, fuehrt das Kommando aus und liefert den Exit-Status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_dir or None)

    missing = _find_missing_requirements(PROJECT_ROOT / "requirements.txt")
    if missing:
        logger.warning(
            "Fehlende Abhaengigkeiten (%s). Bitte 'pip install -r requirements.txt' ausfuehren.", ", ".join(missing)
        )

    try:
        file_config = Config(args.config)
        config = apply_cli_overrides(file_config.run_config(), args)
        if args.command not in COMMANDS:
            raise InvalidParameterError(f"Unbekanntes Kommando '{args.command}'.")
        result = run_scenario(config, args.command, **command_params(args, config))
        if args.command == "calibrate" and args.persist:
            threshold = float(result.reports[0].metadata["calibrated_smallness"])
            file_config.record_value("nls", "smallness", threshold)
    except AcceptanceFailure as exc:
        logger.error("%s", exc)
        print(json.dumps(exc.failures, indent=2, sort_keys=True), file=sys.stderr)
        return EXIT_ACCEPTANCE
    except LabError as exc:
        logger.error("Lauf abgebrochen: %s", exc)
        return EXIT_ERROR
    for paths in result.written:
        print(paths.data)
    for path in result.artifacts:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
