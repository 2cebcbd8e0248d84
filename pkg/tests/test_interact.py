"""
Tests for prompts, question generators, user simulators and interaction records.
"""

import random
import string

import pytest

from src.errors import GatewayError, GenerationError, InputError, ParseError, ProtocolError
from src.facet import Facet, Polarity
from src.interact import (
    Answer,
    AnswerSource,
    CalibrationExample,
    GeneratorTag,
    HeuristicSimulator,
    Interaction,
    LexicalSimulator,
    RemoteGenerator,
    RemoteSimulator,
    TemplateGenerator,
    calibrate_theta,
    heuristic_answer,
    lexical_sim_answer,
    parse_prompt,
    remote_answer,
    serialize_cq_prompt,
    serialize_rank_prompt,
    serialize_relevance_prompt,
    serialize_us_prompt,
    template_question,
)
from src.interact.gateway import GatewayClient
from src.interact.prompts import CQ_FIELDS, RANK_FIELDS, US_FIELDS

FACET = Facet(("toxic", "metal", "thermometers"), "p12", "q3", Polarity.POSITIVE)


def random_field(rng):
    """Non-empty text that never contains a field marker."""
    alphabet = string.ascii_letters + string.digits + " .,?!-'éü"
    while True:
        value = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 40)))
        if ": " not in value and value.strip():
            return value


class TestPrompts:
    """Test the byte-exact prompt layouts."""

    def test_layouts(self):
        """Test each serialization against its literal layout."""
        assert serialize_cq_prompt("q", "f") == "Query: q Facet: f"
        assert serialize_us_prompt("q", "i", "c") == "Query: q Intent: i Question: c"
        assert serialize_rank_prompt("q", "d", "c", "yes") == "Query: q Document: d Question: c Answer: yes"
        assert serialize_relevance_prompt("q", "d") == "Query: q Document: d"

    def test_fields_verbatim(self):
        """Test that field values are neither trimmed nor case-folded."""
        assert serialize_cq_prompt("  Mixed Case ", "a  b") == "Query:   Mixed Case  Facet: a  b"

    def test_empty_field(self):
        """Test that empty fields are rejected."""
        with pytest.raises(InputError):
            serialize_cq_prompt("", "facet")

    def test_fuzzed_round_trip(self):
        """Test layout and recovery on 1,000 random field tuples."""
        rng = random.Random(11)
        for _ in range(1000):
            q, f, i, c, d = (random_field(rng) for _ in range(5))
            a = rng.choice(["yes", "no"])
            cq = serialize_cq_prompt(q, f)
            us = serialize_us_prompt(q, i, c)
            rank = serialize_rank_prompt(q, d, c, a)
            assert cq == "Query: " + q + " Facet: " + f
            assert us == "Query: " + q + " Intent: " + i + " Question: " + c
            assert rank == "Query: " + q + " Document: " + d + " Question: " + c + " Answer: " + a
            assert parse_prompt(cq, CQ_FIELDS) == [q, f]
            assert parse_prompt(us, US_FIELDS) == [q, i, c]
            assert parse_prompt(rank, RANK_FIELDS) == [q, d, c, a]

    def test_parse_missing_marker(self):
        """Test that a prompt lacking a marker cannot be parsed."""
        with pytest.raises(ParseError):
            parse_prompt("Query: q", CQ_FIELDS)


class TestGenerators:
    """Test question generation."""

    def test_template(self):
        """Test the template question."""
        assert template_question(FACET) == "are you looking for toxic metal thermometers?"
        question = TemplateGenerator().generate("mercury", FACET)
        assert question.tag is GeneratorTag.TEMPLATE

    def test_remote(self, stub_gateway):
        """Test that the remote generator sends the question prompt with nucleus p."""
        generator = RemoteGenerator(GatewayClient(stub_gateway.config()), nucleus_p=0.9)
        question = generator.generate("mercury toxicity", FACET)
        assert question.text == "do you want to know about toxic metal thermometers?"
        assert question.tag is GeneratorTag.REMOTE
        request = stub_gateway.requests["generate"][0]
        assert request == {"prompt": "Query: mercury toxicity Facet: toxic metal thermometers", "nucleus_p": 0.9}

    def test_remote_fallback(self, stub_gateway):
        """Test the template fallback on gateway failure."""
        stub_gateway.handlers["generate"] = lambda payload: (500, {"error": "down"})
        generator = RemoteGenerator(GatewayClient(stub_gateway.config()), fallback_to_template=True)
        question = generator.generate("mercury", FACET)
        assert question.text == template_question(FACET)
        assert question.tag is GeneratorTag.TEMPLATE

    def test_remote_empty_fallback(self, stub_gateway):
        """Test the template fallback on a whitespace question."""
        stub_gateway.handlers["generate"] = lambda payload: (200, {"text": "   "})
        generator = RemoteGenerator(GatewayClient(stub_gateway.config()))
        assert generator.generate("mercury", FACET).tag is GeneratorTag.TEMPLATE

    def test_remote_without_fallback(self, stub_gateway):
        """Test that failures surface when fallback is disabled."""
        client = GatewayClient(stub_gateway.config())
        stub_gateway.handlers["generate"] = lambda payload: (503, {"error": "busy"})
        with pytest.raises(GatewayError):
            RemoteGenerator(client, fallback_to_template=False).generate("mercury", FACET)
        stub_gateway.handlers["generate"] = lambda payload: (200, {"text": ""})
        with pytest.raises(GenerationError):
            RemoteGenerator(client, fallback_to_template=False).generate("mercury", FACET)


class TestSimulators:
    """Test the user simulators."""

    def test_heuristic(self):
        """Test that the heuristic answer follows polarity."""
        assert heuristic_answer(FACET) is Answer.YES
        assert heuristic_answer(FACET.with_polarity(Polarity.NEGATIVE)) is Answer.NO
        with pytest.raises(InputError):
            heuristic_answer(FACET.with_polarity(None))

    def test_lexical_yes(self):
        """Test that a question covered by the intent is answered yes."""
        answer = lexical_sim_answer(
            "mercury toxicity",
            "Mercury is a toxic heavy metal used in thermometers.",
            "are you looking for toxic metal thermometers?",
        )
        assert answer is Answer.YES

    def test_lexical_no(self):
        """Test that a question about other content is answered no."""
        answer = lexical_sim_answer(
            "mercury toxicity",
            "Mercury is a toxic heavy metal used in thermometers.",
            "are you looking for planet orbit sun?",
        )
        assert answer is Answer.NO

    def test_lexical_threshold(self):
        """Test coverage against theta: two of three content words are covered."""
        intent = "toxic metal"
        question = "are you looking for toxic metal barometers?"
        assert lexical_sim_answer("mercury", intent, question, theta=0.6) is Answer.YES
        assert lexical_sim_answer("mercury", intent, question, theta=0.7) is Answer.NO

    def test_lexical_no_content(self):
        """Test that a question made only of query words and boilerplate is answered no."""
        assert lexical_sim_answer("mercury", "mercury is toxic", "are you looking for mercury?") is Answer.NO

    def test_lexical_validation(self):
        """Test precondition checks."""
        with pytest.raises(InputError):
            lexical_sim_answer("q", "", "question?")
        with pytest.raises(InputError):
            lexical_sim_answer("q", "intent", "question?", theta=1.5)

    def test_simulator_sources(self):
        """Test the answer source of each simulator."""
        assert HeuristicSimulator().answer("q", FACET, "question?", None) is Answer.YES
        assert HeuristicSimulator.source is AnswerSource.HEURISTIC
        assert LexicalSimulator.source is AnswerSource.LEXICAL_SIM
        with pytest.raises(InputError):
            LexicalSimulator().answer("q", FACET, "question?", None)

    def test_remote_answer(self, stub_gateway):
        """Test that the remote simulator normalizes the answer."""
        stub_gateway.handlers["answer"] = lambda payload: (200, {"text": " No\n"})
        client = GatewayClient(stub_gateway.config())
        assert RemoteSimulator(client).answer("q", FACET, "question?", "intent") is Answer.NO
        assert stub_gateway.requests["answer"][0] == {"prompt": "Query: q Intent: intent Question: question?"}

    @pytest.mark.parametrize("text", ["maybe", "yes.", "", "yes no"])
    def test_remote_answer_rejects(self, stub_gateway, text):
        """Test that anything but yes or no is a protocol error."""
        stub_gateway.handlers["answer"] = lambda payload: (200, {"text": text})
        with pytest.raises(ProtocolError):
            remote_answer(GatewayClient(stub_gateway.config()), "q", "intent", "question?")

    def test_calibrate_theta(self):
        """Test that calibration picks the smallest theta with the best agreement."""
        examples = [
            CalibrationExample("q", "alpha beta gamma", "are you looking for alpha beta gamma?", Answer.YES),
            CalibrationExample("q", "alpha beta gamma", "are you looking for alpha beta delta?", Answer.YES),
            CalibrationExample("q", "alpha beta gamma", "are you looking for alpha delta epsilon?", Answer.NO),
        ]
        theta, agreement = calibrate_theta(examples)
        # coverages 1, 2/3, 1/3: any theta in (1/3, 2/3] is perfect; the grid's smallest is 0.4
        assert theta == 0.4
        assert agreement == 1.0

    def test_calibrate_empty(self):
        """Test that calibration needs examples."""
        with pytest.raises(InputError):
            calibrate_theta([])


class TestInteraction:
    """Test the interaction record."""

    def make(self, **overrides):
        fields = dict(
            query_id="q3", turn=1, facet=FACET, question="are you looking for toxic metal thermometers?",
            answer=Answer.YES, intent_passage_id=None, generator=GeneratorTag.TEMPLATE,
            answer_source=AnswerSource.HEURISTIC,
        )
        fields.update(overrides)
        return Interaction(**fields)

    def test_dict_round_trip(self):
        """Test the record keys and reload."""
        interaction = self.make()
        record = interaction.to_dict()
        assert set(record) == {"qid", "turn", "facet", "question", "answer", "intent_pid", "gen", "ans_src"}
        assert Interaction.from_dict(record) == interaction

    def test_heuristic_consistency(self):
        """Test that a heuristic answer must agree with the facet polarity."""
        with pytest.raises(InputError):
            self.make(answer=Answer.NO)

    def test_turn_positive(self):
        """Test that turns start at one."""
        with pytest.raises(InputError):
            self.make(turn=0)

    def test_malformed_record(self):
        """Test that a record with an unknown answer is a parse error."""
        record = self.make().to_dict()
        record["answer"] = "perhaps"
        with pytest.raises(ParseError):
            Interaction.from_dict(record)

    def test_answer_sign(self):
        """Test the numeric sign of answers."""
        assert Answer.YES.sign == 1
        assert Answer.NO.sign == -1


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
