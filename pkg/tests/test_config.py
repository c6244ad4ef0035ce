import pytest

from conftest import SMALL_CONFIG
from thincpd.config import from_dict, loads
from thincpd.config import tomllib
from thincpd.errors import InputError


def test_defaults_filled():
    cfg = loads(SMALL_CONFIG)
    assert cfg.t_max == 800
    assert cfg.detector_params["scanb"]["pool_modes"] == ("raw", "thinned")
    assert cfg.detector_params["scanb"]["constants_pool"] == "same"
    assert cfg.bandwidth == "median" and cfg.kernel_family == "rbf"


def test_round_trip():
    cfg = loads(SMALL_CONFIG)
    again = loads(cfg.to_toml())
    assert again == cfg
    assert loads(again.to_toml()) == again


def test_round_trip_all_detectors():
    text = SMALL_CONFIG.replace('detectors = ["scanb"]', 'detectors = ["scanb", "kcusum", "hotelling"]')
    text += '\n[hotelling]\nridge = 0.001\npool_modes = ["raw"]\n[kcusum]\ndelta = 0.05\n'
    cfg = loads(text)
    assert loads(cfg.to_toml()) == cfg
    assert cfg.detector_params["hotelling"]["ridge"] == 0.001


def doc():
    return tomllib.loads(SMALL_CONFIG)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d["experiment"].update(bogus=1), "unknown key"),
        (lambda d: d.update(extra={}), "unknown config section"),
        (lambda d: d["experiment"].pop("target_arl"), "target_arl"),
        (lambda d: d.pop("post_change"), "post_change"),
        (lambda d: d["experiment"].update(detectors=["nope"]), "detectors"),
        (lambda d: d["pool"].update(thin_size=400), "exceeds"),
        (lambda d: d["post_change"].update(d=3), "differ"),
        (lambda d: d["scanb"].update(pool_modes=["fresh"]), "pool_modes"),
        (lambda d: d["experiment"].update(target_arl=[5]), "target ARL"),
        (lambda d: d["experiment"].update(t_max=60), "t_max/2"),
        (lambda d: d["scanb"].update(N=20), "N\\*B"),
        (lambda d: d.update(kcusum={"delta": 0.1}), "not listed"),
        (lambda d: d["kernel"].update(bandwidth=-1.0) if "kernel" in d else d.update(kernel={"bandwidth": -1.0}), "bandwidth"),
        (lambda d: d["experiment"].update(trials=0), "trials"),
    ],
)
def test_fail_fast(mutate, message):
    d = doc()
    mutate(d)
    with pytest.raises(InputError, match=message):
        from_dict(d)


def test_bad_toml():
    with pytest.raises(InputError, match="TOML"):
        loads("[experiment\n")
