"""Command line interface.

Verbs: ``analyze``, ``hat``, ``generate``, ``report-schema``.  Exit codes
are 0 when every verdict passes, 1 for a failed verdict, 2 for unusable
input and 3 for an internal inconsistency.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .gallery import GalleryError, GalleryShape, generate
from .geometry import GeometryError
from .hats import Hat, HatError, write_hat_off
from .mesh import MeshError, TriMesh, load_mesh, write_off
from .pipeline import Status, error_record, run_analyze, run_hat
from .report import AnalysisReport, content_digest, plain, report_schema
from .tolerances import Tolerances

logger = logging.getLogger("starrigid")


class InputError(Exception):
    pass


@dataclasses.dataclass
class Source:
    mesh: TriMesh | None
    hat: Hat | None
    apex: int | None
    info: dict
    shape: GalleryShape | None = None


def _tolerances(args) -> Tolerances:
    changes = {f.name: getattr(args, f"tol_{f.name}") for f in dataclasses.fields(Tolerances)
               if getattr(args, f"tol_{f.name}", None) is not None}
    return Tolerances().replace(**changes)


def _retol(mesh: TriMesh, tol: Tolerances) -> TriMesh:
    return mesh if mesh.tol == tol else TriMesh(mesh.vertices, mesh.triangles, mesh.polygons, tol)


def _load(args, tol: Tolerances) -> Source:
    if args.input:
        path = Path(args.input)
        fmt = args.input_format or path.suffix.lstrip(".").upper() or "OFF"
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc}") from exc
        mesh = load_mesh(data, fmt, tol)
        info = {"kind": "file", "source": str(path), "format": fmt.upper(), "seed": args.seed,
                "digest": content_digest(data)}
        return Source(mesh, None, None, info)
    shape = generate(args.generate, args.seed)
    mesh = _retol(shape.mesh, tol) if shape.mesh is not None else None
    hat = None
    if shape.hat is not None:
        hat = Hat.from_mesh(_retol(shape.hat.mesh, tol), dict(shape.hat.lengths), check="weak")
    text = write_off(mesh) if mesh is not None else write_hat_off(hat)
    info = {"kind": "generator", "source": args.generate, "format": None, "seed": shape.seed,
            "digest": content_digest(text)}
    return Source(mesh, hat, shape.apex, info, shape)


def _apices(arg, src: Source) -> list:
    if arg is None:
        arg = "auto" if src.apex is None else str(src.apex)
    if arg == "auto":
        return list(range(src.mesh.n_vertices))
    try:
        a = int(arg)
    except ValueError:
        raise InputError(f"--apex must be a vertex index or 'auto', got {arg!r}") from None
    if not 0 <= a < src.mesh.n_vertices:
        raise InputError(f"apex {a} out of range for {src.mesh.n_vertices} vertices")
    return [a]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _t_list(text: str) -> list:
    try:
        ts = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad t-list {text!r}") from None
    if not ts or any(not 0 <= t < 1 for t in ts):
        raise argparse.ArgumentTypeError("homotopy samples must lie in [0, 1)")
    return ts


def _run(args, command: str) -> int:
    tol = _tolerances(args)
    report = AnalysisReport.new(command, {"kind": "file" if args.input else "generator",
                                          "source": args.input or args.generate,
                                          "digest": content_digest(b"")}, tol)
    try:
        src = _load(args, tol)
        report.input = src.info
        report.generator = src.shape.summary() if src.shape else None
        if command == "analyze":
            if src.mesh is None:
                raise InputError("analyze needs a closed surface; use the hat verb for hat generators")
            results, verdicts, code = run_analyze(src.mesh, _apices(args.apex, src))
            off = write_off(src.mesh)
        else:
            if src.mesh is not None and not src.mesh.closed:
                src = dataclasses.replace(src, hat=Hat.from_mesh(src.mesh, check="weak"), mesh=None)
            if src.mesh is not None:
                apex = _apices("0" if args.apex is None and src.apex is None else args.apex, src)
                if len(apex) != 1:
                    raise InputError("the hat verb needs a single apex")
                results, verdicts, code = run_hat(mesh=src.mesh, apex=apex[0], do_complete=args.complete,
                                                  homotopy=args.homotopy)
            else:
                results, verdicts, code = run_hat(hat=src.hat, do_complete=args.complete,
                                                  homotopy=args.homotopy)
            off = None
    except (InputError, GalleryError, MeshError, OSError) as exc:
        # a hat that fails its own invariants came from a violated hypothesis
        code = Status.VERDICT_FAILURE if isinstance(exc, HatError) else Status.INPUT_ERROR
        report.errors.append(error_record(exc))
        report.exit_code = code
        logger.error("%s", exc)
        if args.format == "json":
            _emit(report.to_json(), args.out)
        return int(code)
    except GeometryError as exc:
        report.errors.append(error_record(exc))
        report.exit_code = Status.VERDICT_FAILURE
        logger.error("%s", exc)
        if args.format == "json":
            _emit(report.to_json(), args.out)
        return int(Status.VERDICT_FAILURE)
    report.results, report.verdicts, report.exit_code = results, verdicts, int(code)
    report.errors.extend(results.pop("errors", []))
    if args.format == "off":
        _emit(off if off is not None else write_hat_off(src.hat) if src.hat else write_off(src.mesh), args.out)
    else:
        _emit(report.to_json(), args.out)
    logger.info("%s: exit %d", command, int(code))
    return int(code)


def cmd_generate(args) -> int:
    try:
        shape = generate(args.spec, args.seed)
    except (GalleryError, MeshError, GeometryError) as exc:
        logger.error("%s", exc)
        return int(Status.INPUT_ERROR)
    if args.format == "json":
        doc = {"shape": shape.summary(),
               "mesh": None if shape.mesh is None else {"vertices": shape.mesh.vertices,
                                                         "triangles": shape.mesh.triangles},
               "hat": None if shape.hat is None else {"vertices": shape.hat.vertices,
                                                       "triangles": shape.hat.faces}}
        text = json.dumps(plain(doc), indent=2) + "\n"
    else:
        text = write_off(shape.mesh) if shape.mesh is not None else write_hat_off(shape.hat)
    _emit(text, args.out)
    return 0


def cmd_schema(args) -> int:
    _emit(json.dumps(report_schema(), indent=2) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="starrigid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH", help="OFF or OBJ surface")
    src.add_argument("--generate", metavar="SPEC", help="gallery spec, e.g. 'suspension:n=5'")
    common.add_argument("--input-format", choices=["OFF", "OBJ", "off", "obj"])
    common.add_argument("--apex", metavar="INDEX|auto")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=["json", "off"], default="json")
    for f in dataclasses.fields(Tolerances):
        common.add_argument(f"--tol-{f.name}", type=float, metavar="X", help=f"default {f.default:g}")

    p = sub.add_parser("analyze", parents=[common], help="rigidity and curvature matrices of a polyhedron")
    p.set_defaults(func=lambda a: _run(a, "analyze"))
    p = sub.add_parser("hat", parents=[common], help="hat of a polyhedron seen from an apex")
    p.add_argument("--complete", action="store_true", help="glue simplices until the hat is convex")
    p.add_argument("--homotopy", type=_t_list, metavar="T,T,...")
    p.set_defaults(func=lambda a: _run(a, "hat"))
    p = sub.add_parser("generate", help="write a gallery shape")
    p.add_argument("spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=["json", "off"], default="off")
    p.set_defaults(func=cmd_generate)
    p = sub.add_parser("report-schema", help="print the report JSON schema")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # anything unexpected is an internal error
        logger.exception("internal error: %s", exc)
        return int(Status.INCONSISTENT)


if __name__ == "__main__":
    sys.exit(main())
