import itertools

from hypothesis import given

from chasekit.hom import entails, enumerate_matches, find_homomorphism, is_homomorphism
from chasekit.model import Interpretation, parse_db

from conftest import brute_force_hom, small_interpretations


def cycle(n: int) -> Interpretation:
    return Interpretation(("ed", (i, i % n + 1)) for i in range(1, n + 1))


def test_collapse_onto_self_loop():
    h = find_homomorphism(parse_db("ed(a,b)."), parse_db("ed(c,c)."))
    assert h == {1: 1, 2: 1}


def test_five_cycle_does_not_map_to_three_cycle():
    assert find_homomorphism(cycle(5), cycle(3)) is None
    assert brute_force_hom(cycle(5), cycle(3)) == []


def test_prime_cycles_are_incomparable():
    for p, q in itertools.permutations([2, 3, 5, 7], 2):
        assert find_homomorphism(cycle(p), cycle(q)) is None


def test_cycle_maps_onto_its_divisor():
    assert is_homomorphism(find_homomorphism(cycle(6), cycle(3)), cycle(6), cycle(3))


def test_entails_examples():
    assert entails(parse_db("p(a)."), parse_db("p(n)."))
    assert not entails(parse_db(""), parse_db("p(n)."))
    assert not entails(parse_db("ed(a,b). ed(b,c)."), parse_db("ed(u,v). ed(v,u)."))


def test_enumerate_matches_examples():
    db = parse_db("p(a). p(b).")
    assert enumerate_matches([("p", ("x",))], db) == [{"x": 1}, {"x": 2}]
    assert enumerate_matches([], Interpretation()) == [{}]
    assert len(enumerate_matches([("ed", ("x", "y")), ("ed", ("y", "x"))],
                                 parse_db("ed(a,b). ed(b,a)."))) == 2


def test_repeated_variable_in_pattern():
    db = parse_db("ed(a,a). ed(a,b).")
    assert enumerate_matches([("ed", ("x", "x"))], db) == [{"x": 1}]


@given(small_interpretations(max_nulls=4), small_interpretations(max_nulls=4))
def test_find_homomorphism_agrees_with_brute_force(src, dst):
    h = find_homomorphism(src, dst)
    maps = brute_force_hom(src, dst)
    assert (h is not None) == bool(maps)
    if h is not None:
        assert is_homomorphism(h, src, dst)


@given(small_interpretations(max_nulls=3), small_interpretations(max_nulls=3),
       small_interpretations(max_nulls=3))
def test_witnesses_compose(a, b, c):
    h1, h2 = find_homomorphism(a, b), find_homomorphism(b, c)
    if h1 is not None and h2 is not None:
        assert is_homomorphism({x: h2[y] for x, y in h1.items()}, a, c)


@given(small_interpretations(max_nulls=4))
def test_match_count_agrees_with_brute_force(i):
    body = [("ed", ("x", "y")), ("p", ("y",))]
    nulls = sorted(i.nulls())
    want = sum(1 for x, y in itertools.product(nulls, repeat=2)
               if ("ed", (x, y)) in i and ("p", (y,)) in i)
    assert len(enumerate_matches(body, i)) == want
