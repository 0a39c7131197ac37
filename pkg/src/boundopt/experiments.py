"""Declarative experiments: data generation, preprocessing, runs, diagnostics and output files."""
import hashlib
import json
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__, cccp, diagnostics, em, gis, nmf, numerics
from .core import IterationMap, LearningCurve, StopRule, run
from .exceptions import ConfigError, IncomparableRunsError, NumericError

ALGORITHMS = ("em-mog", "em-hmm", "gis-maxent", "gis-logistic", "nmf", "cccp")
ALLOWED_PREPROCESSING = {
    "em-mog": (),
    "em-hmm": (),
    "gis-maxent": ("translate", "whiten"),
    "gis-logistic": ("translate", "whiten"),
    "nmf": ("translate",),
    "cccp": ("decomposition",),
}
DATA_DEFAULTS = {
    "em-mog": {"separation": "well", "n": 200, "d": 1, "seed": 0},
    "em-hmm": {"kind": "structured", "K": 5, "A": 5, "num_seqs": 20, "length": 100, "seed": 0},
    "gis-maxent": {"n_outcomes": 12, "d": 3, "offset": 20.0, "correlated": False, "seed": 0},
    "gis-logistic": {"n": 2000, "d": 2, "oriented": False, "offset": 20.0, "seed": 0},
    "nmf": {"dim": 16, "n_vectors": 100, "offset": 20.0, "seed": 0},
    "cccp": {"x0": 2.0, "seed": 0},
}
MODEL_DEFAULTS = {
    "em-mog": {"n_components": 2, "init": "quantile"},
    "em-hmm": {"concentration": 5.0},
    "gis-maxent": {},
    "gis-logistic": {},
    "nmf": {"rank": 2, "mode": "sequential"},
    "cccp": {"decompositions": {}},
}
# runs longer than this keep only a trailing window of iterates
TRAJECTORY_WINDOW = 400
DIAGNOSTIC_DIM_LIMIT = 400


def default_output_root() -> Path:
    return Path(os.environ.get("BOUNDOPT_OUT", "runs"))


@dataclass
class ExperimentSpec:
    algorithm: str
    data: Dict[str, Any] = field(default_factory=dict)
    preprocessing: List[str] = field(default_factory=list)
    stop: StopRule = field(default_factory=StopRule)
    outputs: Optional[str] = None
    model: Dict[str, Any] = field(default_factory=dict)
    name: Optional[str] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: unknown value {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not isinstance(self.data, dict):
            raise ConfigError("data: expected an object")
        if not isinstance(self.model, dict):
            raise ConfigError("model: expected an object")
        unknown = set(self.data) - set(DATA_DEFAULTS[self.algorithm])
        if unknown:
            raise ConfigError(f"data: unknown field(s) {sorted(unknown)} for {self.algorithm}")
        unknown = set(self.model) - set(MODEL_DEFAULTS[self.algorithm]) - {"init_seed"}
        if unknown:
            raise ConfigError(f"model: unknown field(s) {sorted(unknown)} for {self.algorithm}")
        self.data = {**DATA_DEFAULTS[self.algorithm], **self.data}
        self.model = {**MODEL_DEFAULTS[self.algorithm], **self.model}
        if isinstance(self.preprocessing, str):
            self.preprocessing = [self.preprocessing]
        steps = [p for p in self.preprocessing if p != "none"]
        allowed = ALLOWED_PREPROCESSING[self.algorithm]
        for p in steps:
            head = p.split(":", 1)[0]
            if head not in allowed:
                raise ConfigError(f"preprocessing: {p!r} is not valid for {self.algorithm}")
        if self.algorithm == "cccp":
            if len(steps) > 1:
                raise ConfigError("preprocessing: cccp takes exactly one decomposition:<name> entry")
            if not steps:
                steps = ["decomposition:dec1"]
            name = steps[0].split(":", 1)[1] if ":" in steps[0] else ""
            known = set(cccp.QUARTIC_BENCH) | set(self.model["decompositions"])
            if name not in known:
                raise ConfigError(f"preprocessing: unknown decomposition {name!r}; known {sorted(known)}")
        self.preprocessing = steps
        if self.algorithm == "em-mog" and int(self.model["n_components"]) > int(self.data["n"]):
            raise ConfigError("model: n_components exceeds the number of data points")
        if not isinstance(self.stop, StopRule):
            raise ConfigError("stop: expected a StopRule")
        if self.name is None:
            self.name = "-".join([self.algorithm] + self._variant() + [p.replace(":", "-") for p in steps or ["naive"]]
                                 + [f"seed{self.seed}"])

    def _variant(self) -> List[str]:
        d = self.data
        if self.algorithm == "em-mog":
            return [str(d["separation"])]
        if self.algorithm == "em-hmm":
            return [str(d["kind"])]
        if self.algorithm == "gis-logistic" and d["oriented"]:
            return ["oriented"]
        if self.algorithm == "gis-maxent" and d["correlated"]:
            return ["correlated"]
        return []

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return ExperimentSpec(self.algorithm, {**self.data, "seed": int(seed)}, list(self.preprocessing),
                              self.stop, self.outputs, dict(self.model), None)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "algorithm": self.algorithm, "data": self.data, "model": self.model,
                "preprocessing": self.preprocessing,
                "stop": {"rel_tol": self.stop.rel_tol, "max_iter": self.stop.max_iter},
                "outputs": self.outputs}

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "ExperimentSpec":
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object")
        unknown = set(doc) - {"name", "algorithm", "data", "model", "preprocessing", "stop", "outputs"}
        if unknown:
            raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
        if "algorithm" not in doc:
            raise ConfigError("algorithm: missing")
        stop_doc = doc.get("stop", {})
        if not isinstance(stop_doc, dict) or set(stop_doc) - {"rel_tol", "max_iter"}:
            raise ConfigError("stop: expected an object with rel_tol and/or max_iter")
        try:
            stop = StopRule(float(stop_doc.get("rel_tol", 1e-10)), int(stop_doc.get("max_iter", 10000)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"stop: {exc}") from None
        return cls(doc["algorithm"], dict(doc.get("data", {})), list(doc.get("preprocessing", [])), stop,
                   doc.get("outputs"), dict(doc.get("model", {})), doc.get("name"))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
        return cls.from_dict(doc)


@dataclass
class Problem:
    """A ready-to-run instance: the map, its start point, and files describing the data."""

    imap: IterationMap
    init: np.ndarray
    data_files: Dict[str, str]
    # maps a final parameter vector to a JSON-friendly description in original coordinates
    describe: Callable[[np.ndarray], Dict[str, Any]] = lambda theta: {"theta": np.asarray(theta).tolist()}
    extra_files: Callable[[np.ndarray], Dict[str, str]] = lambda theta: {}


def build_problem(spec: ExperimentSpec) -> Problem:
    d, m = spec.data, spec.model
    init_seed = int(m.get("init_seed", d["seed"]))
    if spec.algorithm == "em-mog":
        data = em.gen_mog_data(d["separation"], int(d["n"]), int(d["d"]), int(d["seed"]))
        start = em.init_mog(data, int(m["n_components"]), init_seed, m["init"])
        imap = em.MoGEMMap(data, start)

        def describe(theta):
            p = imap.decode(theta)
            return {"weights": p.weights.tolist(), "means": p.means.tolist(), "covariances": p.covariances.tolist()}

        return Problem(imap, imap.encode(start), {"data.csv": em.mog_data_to_csv(data)}, describe)
    if spec.algorithm == "em-hmm":
        seqs, truth = em.gen_hmm_data(d["kind"], int(d["K"]), int(d["A"]), int(d["num_seqs"]), int(d["length"]),
                                      int(d["seed"]))
        start = em.init_hmm(int(d["K"]), int(d["A"]), init_seed, float(m["concentration"]))
        imap = em.HmmEMMap(seqs, int(d["K"]), int(d["A"]))

        def describe(theta):
            p = imap.decode(theta)
            return {"initial": p.initial.tolist(), "transitions": p.transitions.tolist(),
                    "emissions": p.emissions.tolist()}

        return Problem(imap, imap.encode(start), {"sequences.txt": em.sequences_to_text(seqs)}, describe)
    if spec.algorithm == "gis-maxent":
        rng = np.random.default_rng(int(d["seed"]))
        model = gis.random_maxent_model(rng, int(d["n_outcomes"]), int(d["d"]), float(d["offset"]),
                                        bool(d["correlated"]))
        files = {"model.txt": model.to_text()}
        for step in spec.preprocessing:
            model = gis.translate_features(model) if step == "translate" else gis.whiten_features(model)
        if spec.preprocessing:
            files["model_preprocessed.txt"] = model.to_text()
        imap = gis.MaxentGISMap(model)

        def describe(theta):
            return {"theta": np.asarray(theta).tolist(),
                    "distribution": gis.model_distribution(model, theta).tolist()}

        return Problem(imap, np.zeros(imap.dim), files, describe)
    if spec.algorithm == "gis-logistic":
        data, w_true = gis.gen_logistic_data(int(d["n"]), int(d["d"]), int(d["seed"]), bool(d["oriented"]),
                                             float(d["offset"]))
        transform = gis.logistic_preprocessing(data, spec.preprocessing)
        work = gis.transform_logistic(data, transform)
        imap = gis.LogisticGISMap(work)

        def describe(theta):
            return {"w": np.asarray(theta).tolist(), "w_original_features": transform.pull_back(theta).tolist(),
                    "w_true": w_true.tolist()}

        return Problem(imap, np.zeros(imap.dim), {"data.csv": data.to_csv()}, describe)
    if spec.algorithm == "nmf":
        V = nmf.gen_nmf_data(int(d["dim"]), int(d["n_vectors"]), float(d["offset"]), int(d["seed"]))
        shift = 0.0
        if "translate" in spec.preprocessing:
            shift = float(V.min()) - nmf.EPS_NMF
            V = nmf.translate_data(V, shift)
        rank = int(m["rank"])
        W0, H0 = nmf.init_factors(V, rank, init_seed)
        imap = nmf.NMFMap(V, rank, m["mode"])

        def describe(theta):
            f = imap.decode(theta)
            return {"shift": shift, "divergence": nmf.kl_divergence(f)}

        def factors(theta):
            f = imap.decode(theta)
            return {"W.csv": nmf.matrix_to_csv(f.W), "H.csv": nmf.matrix_to_csv(f.H)}

        return Problem(imap, imap.encode(W0, H0), {"V.csv": nmf.matrix_to_csv(V)}, describe, factors)
    # cccp
    name = spec.preprocessing[0].split(":", 1)[1]
    custom = m["decompositions"]
    if name in custom:
        entry = custom[name]
        try:
            dec = cccp.polynomial_decomposition(name, entry["vex"], entry["cave"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"model.decompositions.{name}: expected vex and cave coefficient lists ({exc})") from None
    else:
        dec = cccp.get_decomposition(name)
    imap = cccp.CCCPMap(dec)
    return Problem(imap, np.array([float(d["x0"])]), {},
                   lambda theta: {"x": np.asarray(theta).tolist(), "energy": dec.energy(np.asarray(theta))})


def _hessian(imap: IterationMap, theta) -> np.ndarray:
    if hasattr(imap, "hessian"):
        return imap.hessian(theta)
    return numerics.fd_hessian(imap.gradient, theta)


def analyze(imap: IterationMap, final, trajectory: Sequence[np.ndarray]) -> Dict[str, Any]:
    """Diagnostics at the end of a run; each part is skipped with a note if it cannot be computed."""
    out: Dict[str, Any] = {}
    final = np.asarray(final, dtype=float)
    if imap.dim > DIAGNOSTIC_DIM_LIMIT:
        out["skipped"] = f"dimension {imap.dim} above diagnostic limit {DIAGNOSTIC_DIM_LIMIT}"
        return out
    try:
        fp = diagnostics.refine_fixed_point(imap, final)
        out["fixed_point_residual"] = diagnostics.fixed_point_residual(imap, fp)
        report = diagnostics.convergence_report(imap, fp, trajectory)
        out["convergence"] = report.to_dict()
    except NumericError as exc:
        out["convergence_error"] = str(exc)
        return out
    # the direction analysis uses the earliest retained iterate inside the linear regime
    probe = next((t for t in trajectory if diagnostics.near_fixed_point(imap, t)
                  and np.linalg.norm(imap.gradient(t)) > 1e-8), None)
    if probe is None:
        out["direction_note"] = "no retained iterate both near the fixed point and with non-negligible gradient"
        return out
    try:
        H = _hessian(imap, probe)
        out["direction"] = diagnostics.direction_report(imap, probe, H).to_dict()
        M = diagnostics.estimate_rate_matrix(imap, fp)
        out["quasi_newton_residual"] = diagnostics.quasi_newton_residual(imap, probe, M, H)
    except NumericError as exc:
        out["direction_error"] = str(exc)
    return out


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=diagnostics._json_default) + "\n"


def _write_directory(target: Path, files: Dict[str, str]):
    """Write all files into a temporary sibling directory, then swap it into place."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        for name, text in files.items():
            (tmp / name).write_text(text)
        if target.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{target.name}.old.", dir=target.parent))
            os.replace(target, old / "prev")
            os.replace(tmp, target)
            shutil.rmtree(old)
        else:
            os.replace(tmp, target)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


@dataclass
class RunOutcome:
    manifest: Dict[str, Any]
    directory: Path
    curve: LearningCurve
    final: np.ndarray


def run_experiment(spec: ExperimentSpec, out_dir=None, diagnose: bool = True) -> RunOutcome:
    """Generate data, preprocess, run, diagnose and write the run directory."""
    out_dir = Path(out_dir or spec.outputs or default_output_root() / spec.name)
    problem = build_problem(spec)
    imap = problem.imap
    t0 = time.perf_counter()
    result = run(imap, problem.init, spec.stop, keep_trajectory=True, window=TRAJECTORY_WINDOW)
    elapsed = time.perf_counter() - t0
    report = {"spec": spec.to_dict(), "status": result.status, "iterations": result.iterations,
              "final_objective": imap.display_objective(result.curve.objectives[-1]),
              "minimize": imap.minimize, "parameters": problem.describe(result.final)}
    if diagnose:
        report["diagnostics"] = analyze(imap, result.final, result.trajectory)
    files = {"curve.csv": result.curve.to_csv(), "report.json": _json(report)}
    files.update(problem.data_files)
    files.update(problem.extra_files(result.final))
    manifest = {
        "spec": spec.to_dict(),
        "software_version": __version__,
        "wall_clock_seconds": elapsed,
        "status": result.status,
        "iterations": result.iterations,
        "final_objective": report["final_objective"],
        "files": {name: sha256_text(text) for name, text in sorted(files.items())},
    }
    conv = report.get("diagnostics", {}).get("convergence")
    if conv:
        manifest["predicted_rate"] = conv["predicted_rate"]
        manifest["observed_rate"] = conv["observed_rate"]
    files["manifest.json"] = _json(manifest)
    _write_directory(out_dir, files)
    return RunOutcome(manifest, out_dir, result.curve, result.final)


def load_manifest(directory) -> Dict[str, Any]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    manifest["directory"] = str(directory)
    return manifest


def verify_manifest(directory) -> bool:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    return all(sha256_text((directory / n).read_text()) == h for n, h in manifest["files"].items())


def _label(manifest) -> str:
    steps = manifest["spec"]["preprocessing"]
    return "+".join(steps) if steps else "naive"


def compare_runs(manifests: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Iteration counts and speedups relative to the first manifest."""
    if not manifests:
        raise ConfigError("compare: no manifests given")
    base = manifests[0]
    for mf in manifests[1:]:
        if mf["spec"]["algorithm"] != base["spec"]["algorithm"]:
            raise IncomparableRunsError(
                f"algorithms differ: {base['spec']['algorithm']} vs {mf['spec']['algorithm']}")
        if mf["spec"]["data"]["seed"] != base["spec"]["data"]["seed"]:
            raise IncomparableRunsError(
                f"data seeds differ: {base['spec']['data']['seed']} vs {mf['spec']['data']['seed']}")
    rows = []
    for mf in manifests:
        rows.append({"run": mf["spec"]["name"], "preprocessing": _label(mf), "iterations": mf["iterations"],
                     "speedup": base["iterations"] / mf["iterations"] if mf["iterations"] else float("inf"),
                     "final_objective": mf["final_objective"], "predicted_rate": mf.get("predicted_rate"),
                     "observed_rate": mf.get("observed_rate")})
    return rows


def comparison_to_csv(rows: Sequence[Dict[str, Any]]) -> str:
    cols = ["run", "preprocessing", "iterations", "speedup", "final_objective", "predicted_rate", "observed_rate"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else str(r[c]))
                              for c in cols))
    return "\n".join(lines) + "\n"


FIGURE_ALGORITHMS = {
    "fig1-quiver": ("em-mog",),
    "fig2-curves": ("em-mog", "em-hmm"),
    "fig3-curves": ("gis-logistic", "gis-maxent"),
    "fig4-curves": ("nmf", "cccp"),
}


def aligned_curves(manifests: Sequence[Dict[str, Any]]) -> str:
    """Wide CSV: one column per run, objective shifted so each run's last value is exactly zero.

    Minimization runs are shown as energies (un-negated).  Shorter runs
    leave trailing cells empty.
    """
    columns, names = [], []
    for mf in manifests:
        curve = LearningCurve.from_csv((Path(mf["directory"]) / "curve.csv").read_text())
        obj = curve.objectives
        if mf["spec"]["algorithm"] in ("nmf", "cccp"):
            obj = -obj
        columns.append(obj - obj[-1])
        names.append(mf["spec"]["name"])
    length = max(len(c) for c in columns)
    lines = [",".join(["iter"] + names)]
    for i in range(length):
        lines.append(",".join([str(i)] + [repr(float(c[i])) if i < len(c) else "" for c in columns]))
    return "\n".join(lines) + "\n"


def direction_field(imap: IterationMap, points: Sequence[np.ndarray]) -> List[Dict[str, Any]]:
    """Unit step, gradient and Newton directions plus ln|grad| at each point."""
    rows = []
    for p in points:
        p = np.asarray(p, dtype=float)
        g = imap.gradient(p)
        step = imap.step(p) - p
        newton = diagnostics.newton_direction(g, _hessian(imap, p))
        unit = lambda v: (v / np.linalg.norm(v)) if v is not None and np.linalg.norm(v) > 0 else np.full(p.size, np.nan)
        rows.append({"point": p, "step": unit(step), "grad": unit(g), "newton": unit(newton),
                     "log_grad_norm": float(np.log(np.linalg.norm(g)))})
    return rows


def means_only_mog(data) -> em.MoGEMMap:
    """Two components with fixed equal weights and unit variances; only the means move."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] == 1:
        data = data.T
    d = data.shape[1]
    template = em.MoGParams(np.array([0.5, 0.5]), np.zeros((2, d)), np.repeat(np.eye(d)[None], 2, axis=0))
    return em.MoGEMMap(data, template, free=("means",))


def fig1_quiver(data, grid: int = 101, n_points: int = 12, stop: StopRule = StopRule(1e-10, 1000)):
    """Log-likelihood over a grid of (mu1, mu2) plus direction vectors along an EM run (1-d data)."""
    data = np.asarray(data, dtype=float).reshape(-1, 1)
    imap = means_only_mog(data)
    lo, hi = float(data.min()), float(data.max())
    axis = np.linspace(lo, hi, grid)
    lines = ["mu1,mu2,loglik"]
    for a in axis:
        for b in axis:
            lines.append(f"{a!r},{b!r},{imap.objective(np.array([a, b]))!r}")
    start = np.array([lo + 0.25 * (hi - lo), lo + 0.3 * (hi - lo)])
    res = run(imap, start, stop, keep_trajectory=True)
    traj = res.trajectory[:-1] if len(res.trajectory) > 1 else res.trajectory
    idx = np.unique(np.linspace(0, len(traj) - 1, min(n_points, len(traj))).round().astype(int))
    field_rows = direction_field(imap, [traj[i] for i in idx])
    arrows = ["mu1,mu2,step_x,step_y,newton_x,newton_y,grad_x,grad_y,log_grad_norm,cos_step_newton"]
    for r in field_rows:
        cos = float(r["step"] @ r["newton"])
        vals = list(r["point"]) + list(r["step"]) + list(r["newton"]) + list(r["grad"]) + [r["log_grad_norm"], cos]
        arrows.append(",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n", "\n".join(arrows) + "\n"


def emit_figure_data(kind: str, manifests: Sequence[Dict[str, Any]], out_dir) -> List[Path]:
    if kind not in FIGURE_ALGORITHMS:
        raise ConfigError(f"figure: unknown kind {kind!r}; expected one of {sorted(FIGURE_ALGORITHMS)}")
    if not manifests:
        raise ConfigError("figure: no runs given")
    for mf in manifests:
        if mf["spec"]["algorithm"] not in FIGURE_ALGORITHMS[kind]:
            raise ConfigError(f"figure: {kind} does not accept {mf['spec']['algorithm']} runs")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "fig1-quiver":
        mf = manifests[0]
        data = np.loadtxt(Path(mf["directory"]) / "data.csv", delimiter=",", ndmin=2)
        if data.shape[1] != 1:
            raise ConfigError("figure: fig1-quiver needs 1-d mixture data")
        grid_csv, arrows_csv = fig1_quiver(data[:, 0])
        outputs = {"fig1_grid.csv": grid_csv, "fig1_arrows.csv": arrows_csv}
    else:
        outputs = {f"{kind.replace('-', '_')}.csv": aligned_curves(manifests)}
    paths = []
    for name, text in outputs.items():
        p = out_dir / name
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, p)
        paths.append(p)
    return paths
