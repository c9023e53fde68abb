from runcommands import command
from runcommands.commands import local as _local


# One invocation per check documented in README.md
CHECKS = {
    "free-density": "density --v0 zero --v zero --L 1 --emin 1 --emax 9 --esteps 9",
    "density-methods": (
        "density --v0 mathieu:1.0 --v bump:5,0,1 --L 2 --emin 2 --emax 8 --esteps 50"
    ),
    "prufer-direct": "prufer --scenarios 20 --L 50",
    "monodromy": "mcheck --samples 100 --free-points 200",
    "multilinear": "mlinear --g power:1,0.9 exp:1,0.5 wvn:1,1,1 --nmax 6 --simplex-nmax 8",
    "martingale": "martingale --f power:1,0.9 --p 1.5 --depth 8",
    "tail": "tail --g exp:1,1 exp:1,1 --x " + ",".join(str(0.25 * i) for i in range(1, 21)),
    "wkb": (
        "wkb-error --v0 mathieu:1.0 --v power:1,0.9 --E 2 --xmax 1000 "
        "--series-v bump:1,0,5 --series-x 0"
    ),
    "oscillatory": "osc --gammas 1e-1,1e-2,1e-3,1e-4,1e-5",
    "orthogonality": "ortho --v0 mathieu:1.0 --v power:1,1 --E1 1 --L 1e2,1e3,1e4",
    "lee": "lee --families 100 --lengths 1e2,1e3,1e4",
    "identities": "identities --points 100 --sequences 100",
}


@command
def format_code(check=False):
    _local(f"black . {'--check' if check else ''}")


@command
def lint():
    _local("flake8 .")


@command
def test(with_coverage=True, check=True, fail_fast=False):
    if with_coverage:
        _local(
            "coverage run "
            "--source src/spectra "
            "-m unittest discover "
            "-t . -s tests "
            "&& coverage report"
        )
    else:
        fail_fast = "-f" if fail_fast else ""
        _local(f"python -m unittest discover -t . -s tests {fail_fast}")
    if check:
        format_code(check=True)
        lint()


@command
def checks(out_dir="checks", only=None, format="csv"):
    """Run the documented checks, writing one artifact per check."""
    names = list(CHECKS) if only is None else only.split(",")
    _local(f"mkdir -p {out_dir}")
    for name in names:
        _local(f"spectra --out {out_dir}/{name}.{format} --format {format} {CHECKS[name]}")


@command
def tox(clean=False):
    _local(f"tox {'-r' if clean else ''}")
