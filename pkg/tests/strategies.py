"""Shared hypothesis strategies."""
from hypothesis import strategies as st

from fbgforce.core import QuadCalib, TempCharacterization

finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def quad_calibs(draw):
    return QuadCalib(
        a2=draw(st.floats(1.0, 500.0, **finite)),
        a1=draw(st.floats(50.0, 2000.0, **finite)),
        a0=draw(st.floats(-500.0, 500.0, **finite)),
        force_max=draw(st.floats(0.5, 20.0, **finite)),
    )


@st.composite
def temp_chars(draw):
    return TempCharacterization.from_sensitivities(
        draw(st.floats(1.0, 50.0, **finite)), draw(st.floats(1.0, 50.0, **finite))
    )
