import itertools

from hypothesis import settings, strategies as st

from chasekit.model import Interpretation

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True,
                          database=None)
settings.load_profile("default")


def brute_force_hom(src, dst):
    """Every null map src -> dst that sends atoms to atoms, by enumeration."""
    src, dst = Interpretation(src), Interpretation(dst)
    xs = sorted(src.nulls())
    ys = sorted(dst.nulls())
    out = []
    for image in itertools.product(ys, repeat=len(xs)):
        h = dict(zip(xs, image))
        if all((p, tuple(h[a] for a in args)) in dst for p, args in src):
            out.append(h)
    if not xs and all(a in dst for a in src):
        out = [{}]
    return out


def brute_force_iso(i, j) -> bool:
    i, j = Interpretation(i), Interpretation(j)
    xs, ys = sorted(i.nulls()), sorted(j.nulls())
    if len(i) != len(j) or len(xs) != len(ys):
        return False
    for perm in itertools.permutations(ys):
        h = dict(zip(xs, perm))
        if {(p, tuple(h[a] for a in args)) for p, args in i} == set(j):
            return True
    return False


SMALL_PREDS = [("p", 1), ("q", 1), ("ed", 2)]


@st.composite
def small_interpretations(draw, max_nulls=4, max_atoms=6, preds=SMALL_PREDS):
    n = draw(st.integers(1, max_nulls))
    atom = st.sampled_from(preds).flatmap(
        lambda pa: st.tuples(st.just(pa[0]), st.tuples(*[st.integers(1, n)] * pa[1])))
    return Interpretation(draw(st.lists(atom, max_size=max_atoms)))
