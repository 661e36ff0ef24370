"""Property-based invariants (reduced example counts; the acceptance script runs the full counts)."""

import pytest

from properties import ALL


@pytest.mark.parametrize("name", sorted(ALL))
def test_property(name):
    ALL[name](200)()
