"""Duality, unfolding and matching of session types."""

import pytest
from hypothesis import given, strategies as st

from mtlc.parser import ParseError, parse, parse_session
from mtlc.session import SessDef, SessionEnv, SessionError, dual, session_names
from mtlc.syntax import (
    BOOL, INT, UNIT, Branch, ChNeg, ChPos, Named, Nil, NilBar, Rcv, Snd, SVar, TVarLin,
)

SSLIST = "sesstype sslist(a) = rcvtag{#nil => nil | #cons => snd(a)::sslist(a)}"
ENV = parse(SSLIST + "\nfun main() = ()").env
SSLIST_INT = Named("sslist", (INT,))


class TestDual:
    def test_nil(self):
        assert dual(Nil()) == NilBar()

    def test_send(self):
        assert dual(Snd(INT, Nil())) == Rcv(INT, NilBar())

    def test_involution_example(self):
        assert dual(dual(Rcv(BOOL, Nil()))) == Rcv(BOOL, Nil())

    def test_branch_flips_direction(self):
        b = Branch("snd", (("l", Nil()), ("r", Snd(INT, Nil()))))
        assert dual(b) == Branch("rcv", (("l", NilBar()), ("r", Rcv(INT, NilBar()))))

    def test_named_is_marked(self):
        d = dual(SSLIST_INT)
        assert isinstance(d, Named) and d.dual
        assert dual(d) == SSLIST_INT


class TestUnfold:
    def test_sslist(self):
        body = ENV.unfold(SSLIST_INT)
        assert body == Branch("rcv", (("nil", Nil()), ("cons", Snd(INT, SSLIST_INT))))

    def test_dual_reference(self):
        body = ENV.unfold(dual(SSLIST_INT))
        assert body == Branch("snd", (("nil", NilBar()), ("cons", Rcv(INT, dual(SSLIST_INT)))))

    def test_undefined(self):
        with pytest.raises(SessionError):
            ENV.unfold(Named("nope", ()))

    def test_arity(self):
        with pytest.raises(SessionError):
            ENV.unfold(Named("sslist", ()))

    def test_non_contractive(self):
        env = SessionEnv([SessDef("a", (), (), Named("b", ())), SessDef("b", (), (), Named("a", ()))])
        with pytest.raises(SessionError, match="contractive"):
            env.check_contractive()
        with pytest.raises(ParseError) as ei:
            parse("sesstype a = b\nsesstype b = a\nfun main() = ()")
        assert ei.value.code == "session-nc"

    def test_session_parameters(self):
        env = parse("sesstype t(sess A, sess B) = snd(chneg(A))::B\nfun main() = ()").env
        assert env.unfold(Named("t", (Nil(), Rcv(INT, Nil())))) == Snd(ChNeg(Nil()), Rcv(INT, Nil()))
        # a dual parameter inside the body
        env2 = SessionEnv([SessDef("d", (), ("A",), Snd(INT, SVar("A", True)))])
        assert env2.unfold(Named("d", (Snd(BOOL, Nil()),))) == Snd(INT, Rcv(BOOL, NilBar()))

    def test_names(self):
        assert session_names(ChPos(Snd(ChNeg(SSLIST_INT), Nil()))) == {"sslist"}


class TestMatches:
    def test_nil(self):
        assert ENV.matches(Nil(), Nil())

    def test_not_duality(self):
        assert not ENV.matches(Snd(INT, Nil()), Rcv(INT, Nil()))

    def test_unfolding(self):
        assert ENV.matches(SSLIST_INT, ENV.unfold(SSLIST_INT))

    def test_nil_and_nilbar_differ(self):
        assert not ENV.matches(Nil(), NilBar())

    def test_instances_differ(self):
        assert not ENV.matches(SSLIST_INT, Named("sslist", (BOOL,)))


# ---------------------------------------------------------------------------
# properties

payload = st.sampled_from([INT, BOOL, UNIT, ChNeg(Nil()), ChPos(Snd(INT, Nil()))])


def _extend(sub):
    return st.one_of(
        st.builds(Snd, payload, sub),
        st.builds(Rcv, payload, sub),
        st.builds(lambda d, a, b: Branch(d, (("l", a), ("r", b))),
                  st.sampled_from(["snd", "rcv"]), sub, sub),
    )


base = st.one_of(
    st.just(Nil()), st.just(NilBar()),
    st.sampled_from([INT, BOOL]).map(lambda t: Named("sslist", (t,))),
)
sessions = st.recursive(base, _extend, max_leaves=8)


@given(sessions)
def test_dual_is_involution(s):
    assert dual(dual(s)) == s


@given(sessions)
def test_matches_reflexive(s):
    assert ENV.matches(s, s)


@given(sessions)
def test_dual_commutes_with_unfold(s):
    n = Named("sslist", (ChPos(s),))
    assert ENV.unfold(dual(n)) == dual(ENV.unfold(n))


@given(sessions)
def test_unfolding_preserves_matching(s):
    n = Named("sslist", (ChNeg(s),))
    assert ENV.matches(n, ENV.unfold(n))
    assert ENV.matches(dual(n), dual(ENV.unfold(n)))
