import numpy as np
import pytest

from wrapnet.gradcheck import CASES, check_case


@pytest.mark.parametrize("name", sorted(CASES))
def test_every_layer_case(name):
    rep = check_case(name, np.random.default_rng(123))
    assert rep.ok, rep
    assert rep.kink_margin >= 1e-4


def test_unknown_case():
    with pytest.raises(KeyError):
        check_case("nope", np.random.default_rng(0))
