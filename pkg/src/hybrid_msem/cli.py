"""Command line front end.

Settings come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then command line flags. ``hybrid-msem defaults``
prints every key with its default value.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .assembly import assemble_global, assemble_locals, write_coordinate
from .errors import ConfigError, HybridMSEMError
from .mesh import MeshConfig, build_mesh
from .polybasis import BasisSet1D
from .solver import build_schur, condition_number
from .topology import connectivity_en, count_dofs
from .verification import (
    CSV_COLUMNS,
    RunSpec,
    make_case,
    observed_order,
    records_to_csv,
    run_case,
    run_convergence,
    sample_fields,
)

TABLE_DEGREES = (5, 10, 15, 20, 25)
TABLE_GRIDS = (20, 40, 60, 80, 100)


@dataclass
class RunConfig:
    alpha: float = 0.1
    mesh: str = "orthogonal"
    c: float = 0.15
    kx: int = 3
    ky: int = 3
    degree: int = 6
    quad: int | None = None
    path: str = "both"
    source: str = "herbin"
    out: str = "out"
    threads: int = 1
    timings: bool = True
    cond: str = "none"
    samples: int = 0
    sweep: str = "p"
    ks: list[int] = field(default_factory=lambda: [2, 4, 8, 16])
    degrees: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6, 7, 8])
    meshes: list[str] = field(default_factory=lambda: ["orthogonal", "curved"])

    def validate(self) -> None:
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.mesh not in ("orthogonal", "curved"):
            raise ConfigError(f"mesh must be orthogonal or curved, got {self.mesh!r}")
        for m in self.meshes:
            if m not in ("orthogonal", "curved"):
                raise ConfigError(f"unknown mesh kind {m!r} in meshes")
        if self.c < 0:
            raise ConfigError(f"c must be >= 0, got {self.c}")
        if self.kx < 1 or self.ky < 1:
            raise ConfigError(f"element counts must be >= 1, got {self.kx}x{self.ky}")
        if self.degree < 1 or any(n < 1 for n in self.degrees):
            raise ConfigError("polynomial degrees must be >= 1")
        if any(k < 1 for k in self.ks):
            raise ConfigError("element counts in ks must be >= 1")
        if self.quad is not None and self.quad < 1:
            raise ConfigError(f"quad must be >= 1, got {self.quad}")
        if self.path not in ("monolithic", "schur", "both"):
            raise ConfigError(f"path must be monolithic, schur or both, got {self.path!r}")
        if self.source not in ("herbin", "zero"):
            raise ConfigError(f"source must be herbin or zero, got {self.source!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.cond not in ("none", "auto", "dense-eigen", "iterative-estimate"):
            raise ConfigError(f"unknown cond method {self.cond!r}")
        if self.sweep not in ("h", "p"):
            raise ConfigError(f"sweep must be h or p, got {self.sweep!r}")

    def spec(self, kx: int | None = None, ky: int | None = None, N: int | None = None, mesh: str | None = None) -> RunSpec:
        return RunSpec(
            kx=self.kx if kx is None else kx,
            ky=self.ky if ky is None else ky,
            N=self.degree if N is None else N,
            mesh=self.mesh if mesh is None else mesh,
            c=self.c,
            alpha=self.alpha,
            quad=self.quad,
            path=self.path,
            source=self.source,
            threads=self.threads,
            cond=self.cond,
        )


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(name: str, raw: str):
    f = {fl.name: fl for fl in dataclasses.fields(RunConfig)}[name]
    kind = str(f.type)
    raw = raw.strip()
    if kind.startswith("list"):
        items = raw.replace(",", " ").split()
        return [int(x) for x in items] if "int" in kind else items
    if kind == "bool":
        return _parse_bool(raw)
    if "None" in kind and raw.lower() in ("", "none", "auto"):
        return None
    if kind.startswith("int"):
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def read_config_file(path: str | Path) -> dict:
    names = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "k":
            parts = raw.replace(",", " ").split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: k needs two integers")
            key, raw = "kx", parts[0]
            values["ky"] = parts[1]
        if key not in names:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = raw
    return values


def format_defaults() -> str:
    cfg = RunConfig()
    lines = []
    for f in dataclasses.fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, list):
            v = " ".join(str(x) for x in v)
        elif v is None:
            v = "auto"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def build_config(args: argparse.Namespace) -> RunConfig:
    raw: dict[str, str] = {}
    if getattr(args, "config", None):
        raw.update(read_config_file(args.config))
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            overrides[f.name] = v
    if getattr(args, "k", None) is not None:
        overrides["kx"], overrides["ky"] = args.k
    try:
        values = {k: _coerce(k, v) for k, v in raw.items()}
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    values.update(overrides)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--k", nargs=2, type=int, metavar=("KX", "KY"), help="elements per direction")
    p.add_argument("--degree", "-N", type=int, help="polynomial degree N")
    p.add_argument("--mesh", choices=["orthogonal", "curved"])
    p.add_argument("--c", type=float, help="curved-mesh amplitude")
    p.add_argument("--alpha", type=float)
    p.add_argument("--quad", type=int, help="Gauss points per direction (default N+4)")
    p.add_argument("--path", choices=["monolithic", "schur", "both"])
    p.add_argument("--source", choices=["herbin", "zero"])
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--cond", choices=["none", "auto", "dense-eigen", "iterative-estimate"])
    p.add_argument("--no-timings", dest="timings", action="store_const", const=False, default=None,
                   help="write timing columns as nan (byte-reproducible output)")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(ConfigError.exit_code, f"error[{ConfigError.code}]: {' '.join(message.split())}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybrid-msem", description="Hybrid mimetic spectral element Darcy solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one configuration and write a report")
    _common(p)
    p.add_argument("--samples", type=int, help="write an n x n field sample grid per element")

    p = sub.add_parser("sweep", help="h or p convergence sweep to CSV plus a gnuplot script")
    _common(p)
    p.add_argument("--sweep", choices=["h", "p"])
    p.add_argument("--ks", nargs="+", type=int, help="h-sweep: k for k x k meshes")
    p.add_argument("--degrees", nargs="+", type=int, help="p-sweep degrees")
    p.add_argument("--meshes", nargs="+", choices=["orthogonal", "curved"])
    p.add_argument("--report", choices=["dof-table"], help="print the DOF tables instead of sweeping")

    p = sub.add_parser("sparsity", help="export the global matrix pattern")
    _common(p)

    p = sub.add_parser("cond", help="condition number of the interface system")
    _common(p)
    p.add_argument("--degrees", nargs="+", type=int)

    sub.add_parser("dof-table", help="print the 2D and 3D DOF count tables")
    sub.add_parser("defaults", help="print the default configuration")
    return parser


def _write_report(path: Path, items: dict) -> str:
    text = "".join(f"{k} = {v}\n" for k, v in items.items())
    path.write_text(text)
    return text


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def cmd_solve(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run_case(cfg.spec())
    rec = res.record
    report = {
        "kx": cfg.kx, "ky": cfg.ky, "K": rec.K, "N": rec.N, "mesh": rec.mesh, "c": _fmt(rec.c),
        "alpha": _fmt(cfg.alpha), "quad": res.basis.n_quad, "path": cfg.path, "source": cfg.source,
        "source_dofs": "cell-integral",
        "n_full": rec.n_full, "n_lambda": rec.n_lambda, "nnz": rec.nnz,
        "err_p_l2": _fmt(rec.err_p_l2), "err_u_l2": _fmt(rec.err_u_l2),
        "err_u_hdiv": _fmt(rec.err_u_hdiv), "err_div": _fmt(rec.err_div),
    }
    if cfg.path == "both":
        report["max_path_discrepancy"] = _fmt(rec.path_discrepancy)
    if cfg.cond != "none":
        report["cond_S"] = _fmt(rec.cond_S)
    if cfg.timings:
        report["t_assemble_s"] = f"{rec.t_assemble_s:.6f}"
        report["t_solve_s"] = f"{rec.t_solve_s:.6f}"
    sys.stdout.write(_write_report(out / "report.txt", report))
    if cfg.samples:
        rows = sample_fields(res.solution, res.mesh, res.basis, cfg.samples)
        with open(out / "fields.csv", "w") as fh:
            fh.write("element,x,y,p_h,ux_h,uy_h,p_exact\n")
            for e, x, y, p, ux, uy in rows:
                pe = float(res.case.p_exact(x, y))
                fh.write(f"{e},{x!r},{y!r},{p!r},{ux!r},{uy!r},{pe!r}\n")
    return 0


GNUPLOT_TEMPLATE = """\
# columns: {columns}
set datafile separator ","
set logscale y
set format y "10^{{%L}}"
set key outside
set terminal pngcairo size 1500,450
set output "{stem}.png"
set multiplot layout 1,3
{panels}
unset multiplot
"""


def plot_script(csv_name: str, sweep: str, meshes: list[str], columns) -> str:
    xexpr = "(1.0/sqrt($1))" if sweep == "h" else "($2)"
    xlabel = "h = 1/sqrt(K)" if sweep == "h" else "N"
    idx = {c: i + 1 for i, c in enumerate(columns)}
    panels = []
    for col, title in (("err_u_hdiv", "H(div) velocity error"), ("err_p_l2", "L2 pressure error"), ("err_div", "L2 divergence residual")):
        plots = ", ".join(
            f'"{csv_name}" every ::1 using {xexpr}:(strcol({idx["mesh"]}) eq "{m}" ? ${idx[col]} : 1/0) '
            f'with linespoints title "{m}"'
            for m in meshes
        )
        extra = "set logscale x\n" if sweep == "h" else "unset logscale x\n"
        panels.append(f'{extra}set xlabel "{xlabel}"\nset title "{title}"\nplot {plots}')
    return GNUPLOT_TEMPLATE.format(columns=", ".join(columns), stem=Path(csv_name).stem, panels="\n".join(panels))


def cmd_sweep(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = []
    for mesh in cfg.meshes:
        if cfg.sweep == "h":
            specs += [cfg.spec(kx=k, ky=k, mesh=mesh) for k in cfg.ks]
        else:
            specs += [cfg.spec(N=n, mesh=mesh) for n in cfg.degrees]
    records = run_convergence(specs)
    name = f"sweep_{cfg.sweep}.csv"
    (out / name).write_text(records_to_csv(records, timings=cfg.timings))
    (out / f"sweep_{cfg.sweep}.gp").write_text(plot_script(name, cfg.sweep, cfg.meshes, CSV_COLUMNS))
    for mesh in cfg.meshes:
        ok = [r for r in records if r.mesh == mesh and r.ok]
        if cfg.sweep == "h" and len(ok) >= 2:
            h = [r.h for r in ok]
            print(
                f"{mesh}: observed order p_l2 = {observed_order(h, [r.err_p_l2 for r in ok]):.3f}, "
                f"u_hdiv = {observed_order(h, [r.err_u_hdiv for r in ok]):.3f}"
            )
    failed = [r for r in records if not r.ok]
    print(f"wrote {out / name} ({len(records)} rows, {len(failed)} failed)")
    return 0


def dof_table_text() -> str:
    lines = ["2D, K = 3x3: N, full, lambda, ratio"]
    for n in TABLE_DEGREES:
        f, l = count_dofs(2, 3, 3, N=n)
        lines.append(f"{n} {f} {l} {l / f:.2f}")
    lines.append("2D, N = 3: K, full, lambda, ratio")
    for k in TABLE_GRIDS:
        f, l = count_dofs(2, k, k, N=3)
        lines.append(f"{k * k} {f} {l} {l / f:.2f}")
    lines.append("3D, K = 3x3x3: N, full, lambda, ratio")
    for n in TABLE_DEGREES:
        f, l = count_dofs(3, 3, 3, 3, N=n)
        lines.append(f"{n} {f} {l} {l / f:.2f}")
    lines.append("3D, N = 3: K, full, lambda, ratio")
    for k in TABLE_GRIDS:
        f, l = count_dofs(3, k, k, k, N=3)
        lines.append(f"{k**3} {f} {l} {l / f:.2f}")
    return "\n".join(lines) + "\n"


def cmd_sparsity(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    basis = BasisSet1D.build(cfg.degree, cfg.quad)
    mesh = build_mesh(MeshConfig(cfg.kx, cfg.ky, deformation=cfg.mesh, amplitude=cfg.c), basis.quad_nodes)
    system = assemble_global(mesh, basis, make_case(cfg.source, cfg.alpha).problem(), cfg.threads)
    write_coordinate(system.matrix, out / "system.coo")
    write_coordinate(system.E_N, out / "E_N.coo")
    report = {
        "shape": f"{system.shape[0]}x{system.shape[1]}",
        "nnz": system.nnz,
        "n_elements": system.n_elements,
        "n_local": system.n_local,
        "n_lambda": system.n_lambda,
        "E_N_shape": f"{system.E_N.shape[0]}x{system.E_N.shape[1]}",
        "E_N_nnz": system.E_N.nnz,
        "element_block_starts": " ".join(str(e * system.n_local) for e in range(system.n_elements)),
        "lambda_block_start": system.n_x,
    }
    sys.stdout.write(_write_report(out / "sparsity.txt", report))
    return 0


def cmd_cond(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    method = "dense-eigen" if cfg.cond in ("none", "auto") else cfg.cond
    case = make_case(cfg.source, cfg.alpha)
    lines = ["K,N,mesh,c,n_lambda,cond_S"]
    for n in cfg.degrees:
        basis = BasisSet1D.build(n, cfg.quad)
        mcfg = MeshConfig(cfg.kx, cfg.ky, deformation=cfg.mesh, amplitude=cfg.c)
        mesh = build_mesh(mcfg, basis.quad_nodes)
        locals_ = assemble_locals(mesh, basis, case.problem(), cfg.threads)
        S = build_schur(locals_, connectivity_en(mesh, n), cfg.threads).S
        kappa = condition_number(S, method) if S.shape[0] else float("nan")
        lines.append(f"{mesh.n_elements},{n},{cfg.mesh},{mcfg.c!r},{S.shape[0]},{kappa!r}")
    text = "\n".join(lines) + "\n"
    (out / "cond.csv").write_text(text)
    sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "defaults":
            sys.stdout.write(format_defaults())
            return 0
        if args.command == "dof-table":
            sys.stdout.write(dof_table_text())
            return 0
        if args.command == "sweep" and args.report == "dof-table":
            sys.stdout.write(dof_table_text())
            return 0
        cfg = build_config(args)
        return {"solve": cmd_solve, "sweep": cmd_sweep, "sparsity": cmd_sparsity, "cond": cmd_cond}[args.command](cfg)
    except HybridMSEMError as exc:
        msg = " ".join(str(exc).split())
        print(f"error[{exc.code}]: {msg}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
