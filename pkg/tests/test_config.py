import pytest

from levychaos.config import SUITES, ExperimentConfig, default_config, load_config, parse_config
from levychaos.errors import ConfigInvalid
from levychaos.measure import Atomic, Density

BASE = """
[experiment]
version = 1
seed = 7
"""


def _fields(exc):
    return [f for f, _ in exc.value.problems]


def test_minimal_config_uses_defaults():
    cfg = parse_config(BASE)
    assert cfg == ExperimentConfig(seed=7)
    assert cfg.suites == ("oracle",)


def test_full_config():
    cfg = parse_config(BASE + """
suite = all
n_paths = 500
[triplet]
sigma2 = 1
atoms = 1.0:2.0, -0.5:1
[basis]
kind = indicator
intervals = 0.5:1.5
orthonormalize = no
[tolerances]
z = 4
""")
    assert cfg.suites == SUITES
    assert cfg.atoms == ((1.0, 2.0), (-0.5, 1.0))
    assert cfg.basis_kind == "indicator" and cfg.orthonormalize is False
    assert cfg.tolerances.z == 4.0
    tr = cfg.triplet()
    assert isinstance(tr.nu, Atomic) and tr.sigma2 == 1.0


def test_density_config():
    cfg = parse_config(BASE + "[triplet]\ndensity = gauss\ndensity_params = 1 1\ntruncation_eps = 0.01\n")
    assert cfg.atoms == ()
    assert isinstance(cfg.triplet().nu, Density)


def test_seed_is_mandatory():
    with pytest.raises(ConfigInvalid) as exc:
        parse_config("[experiment]\nversion = 1\n")
    assert _fields(exc) == ["experiment.seed"]


def test_every_problem_is_reported():
    with pytest.raises(ConfigInvalid) as exc:
        parse_config("[experiment]\nversion = 2\nbogus = 1\nseed = x\n[extra]\na = 1\n")
    fields = _fields(exc)
    assert {"experiment.bogus", "experiment.seed", "extra", "experiment.version"} <= set(fields)


def test_missing_version():
    with pytest.raises(ConfigInvalid) as exc:
        parse_config("[experiment]\nseed = 1\n")
    assert "experiment.version" in _fields(exc)


@pytest.mark.parametrize("extra, field", [
    ("[experiment]\nn_paths = 0", "n_paths"),
    ("[triplet]\nsigma2 = -1", "triplet.sigma2"),
    ("[triplet]\natoms = 0:1", "triplet.atoms"),
    ("[basis]\nkind = wavelet", "basis.kind"),
    ("[tolerances]\nz = 0", "tolerances.z"),
])
def test_value_rules(extra, field):
    text = BASE.replace("[experiment]\n", "") if extra.startswith("[experiment]") else BASE
    if extra.startswith("[experiment]"):
        text = "[experiment]\nversion = 1\nseed = 7\n" + extra.split("\n", 1)[1]
    else:
        text = text + extra
    with pytest.raises(ConfigInvalid) as exc:
        parse_config(text)
    assert field in _fields(exc)


def test_digest_ignores_workers_and_output():
    a = default_config(1)
    assert a.digest() == a.with_overrides(workers=4, output="elsewhere").digest()
    assert a.digest() != a.with_overrides(seed=2).digest()
    assert len(a.digest()) == 64


def test_load_config(tmp_path):
    p = tmp_path / "e.ini"
    p.write_text(BASE)
    assert load_config(p).seed == 7
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.ini")
