import numpy as np
import pytest

from utils.elm_core import ActivationKind, Dataset, ElmModel, init_hidden_layer
from utils.errors import DataFormatError, OutputPathError
from utils.metrics import Normalizer
from utils.narx import NarxConfig
from utils.online_learners import OselmState, SgelmState, oselm_init, sgelm_init
from utils.serialization import (
    HEADER,
    Checkpoint,
    dump_checkpoint,
    dump_model,
    load_checkpoint,
    load_model,
    parse_checkpoint,
    save_checkpoint,
)

NARX = NarxConfig(input_lags=1, output_lags=1, input_dim=2, output_dim=1)


def random_model(activation=ActivationKind.SIGMOID, n_h=4, y_d=1, seed=3) -> ElmModel:
    layer = init_hidden_layer(NARX.regressor_dim, n_h, activation, seed=seed)
    weights = np.random.default_rng(seed).normal(size=(n_h, y_d)) / 3.0
    return ElmModel(layer, weights)


def checkpoint_with(state=None, model=None, **kwargs) -> Checkpoint:
    model = model if model is not None else random_model()
    return Checkpoint(
        model=model,
        narx=NARX,
        task="identify",
        trainer="sgelm" if isinstance(state, SgelmState) else "oselm",
        state=state,
        input_normalizer=Normalizer(np.array([0.2, 0.0]), np.array([1.0, 1.0 / 3.0])),
        output_normalizer=Normalizer(np.array([-1.7]), np.array([2.9])),
        **kwargs,
    )


def assert_same_model(a: ElmModel, b: ElmModel) -> None:
    assert a.hidden.activation is b.hidden.activation
    assert a.hidden.seed == b.hidden.seed
    assert a.hidden.weights.tobytes() == b.hidden.weights.tobytes()
    assert a.hidden.bias.tobytes() == b.hidden.bias.tobytes()
    assert a.output_weights.tobytes() == b.output_weights.tobytes()


class TestModelFormat:
    @pytest.mark.parametrize("activation", list(ActivationKind))
    def test_round_trip_is_bit_exact(self, activation):
        model = random_model(activation, n_h=7, y_d=2)
        text = dump_model(model)
        assert text.startswith(f"{HEADER}\n3 7 2 {activation.value} 3\n\n")
        back = load_model(text)
        assert_same_model(model, back)
        assert dump_model(back) == text

    def test_bad_header(self):
        text = dump_model(random_model()).replace(HEADER, "ELMSTREAM v0")
        with pytest.raises(DataFormatError) as info:
            load_model(text)
        assert info.value.line == 1
        assert info.value.exit_code == 4

    def test_malformed_row_names_its_line(self):
        lines = dump_model(random_model()).splitlines()
        # header, dims, blank, then the first W_r row
        lines[3] = lines[3].replace(lines[3].split()[0], "abc", 1)
        with pytest.raises(DataFormatError, match="^line 4: "):
            load_model("\n".join(lines))

    def test_missing_block(self):
        text = dump_model(random_model())
        truncated = text[: text.rindex("\n\n")]
        with pytest.raises(DataFormatError, match="expected W"):
            load_model(truncated)

    def test_wrong_row_count(self):
        text = dump_model(random_model()).replace("3 4 1 sigmoid", "2 4 1 sigmoid")
        with pytest.raises(DataFormatError, match="W_r has 3 rows"):
            load_model(text)

    def test_unknown_activation(self):
        text = dump_model(random_model()).replace(" sigmoid ", " relu ")
        with pytest.raises(DataFormatError, match="^line 2: "):
            load_model(text)


class TestCheckpointFormat:
    def test_oselm_round_trip(self):
        rng = np.random.default_rng(0)
        layer = random_model().hidden
        chunk = Dataset(rng.uniform(-1, 1, size=(30, 3)), rng.normal(size=(30, 1)))
        state = oselm_init(chunk, layer, ridge=0.01)
        back = parse_checkpoint(dump_checkpoint(checkpoint_with(state, state.model)))

        assert isinstance(back.state, OselmState)
        assert back.state.covariance.tobytes() == state.covariance.tobytes()
        assert back.state.weights.tobytes() == state.weights.tobytes()
        assert back.state.samples_seen == 30
        assert_same_model(back.model, state.model)

    def test_sgelm_scalar_step_round_trip(self):
        state = sgelm_init(random_model(), 0.0008, scale_factor=2.5, labels=np.array([1, 1, -1]))
        back = parse_checkpoint(dump_checkpoint(checkpoint_with(state, state.model)))

        assert isinstance(back.state, SgelmState)
        assert back.state.step == 0.0008
        assert back.state.scale_factor == 2.5
        assert (back.state.majority_count, back.state.minority_count) == (2, 1)
        assert str(back.state.verdict) == "convergent"
        assert back.trainer == "sgelm"

    def test_sgelm_matrix_step_round_trip(self):
        step = np.diag([0.1, 0.2, 0.3, 1.0 / 7.0])
        state = sgelm_init(random_model(), step)
        text = dump_checkpoint(checkpoint_with(state, state.model))
        assert "step=matrix" in text
        back = parse_checkpoint(text)
        assert back.state.step.tobytes() == step.tobytes()

    def test_metadata_and_normalizers(self):
        checkpoint = checkpoint_with(extra={"weighted": "true"})
        back = parse_checkpoint(dump_checkpoint(checkpoint))
        assert back.state is None
        assert back.narx == NARX
        assert (back.task, back.trainer) == ("identify", "oselm")
        assert back.extra == {"weighted": "true"}
        assert back.input_normalizer.maximum[1] == 1.0 / 3.0
        np.testing.assert_array_equal(back.output_normalizer.minimum, [-1.7])

    def test_train_rows_round_trip(self):
        text = dump_checkpoint(checkpoint_with(train_rows=550))
        assert "train_rows=550" in text
        back = parse_checkpoint(text)
        assert back.train_rows == 550
        assert "train_rows" not in back.extra

    def test_train_rows_is_optional(self):
        assert parse_checkpoint(dump_checkpoint(checkpoint_with())).train_rows is None

    def test_train_rows_must_be_positive(self):
        text = dump_checkpoint(checkpoint_with(train_rows=5))
        text = text.replace("train_rows=5", "train_rows=0")
        with pytest.raises(DataFormatError, match="train_rows"):
            parse_checkpoint(text)

    def test_dump_is_stable(self):
        text = dump_checkpoint(checkpoint_with())
        assert dump_checkpoint(parse_checkpoint(text)) == text

    def test_lags_must_match_model(self):
        text = dump_checkpoint(checkpoint_with()).replace("input_lags=1", "input_lags=2")
        with pytest.raises(DataFormatError, match="regressor"):
            parse_checkpoint(text)

    def test_missing_narx_section(self):
        text = dump_model(random_model())
        with pytest.raises(DataFormatError, match="NARX"):
            parse_checkpoint(text)

    def test_unknown_section(self):
        text = dump_checkpoint(checkpoint_with()) + "\nEXTRA\nfoo=1\n"
        with pytest.raises(DataFormatError, match="unknown section"):
            parse_checkpoint(text)

    def test_save_and_load(self, tmp_path):
        path = tmp_path / "model.ckpt"
        checkpoint = checkpoint_with()
        save_checkpoint(str(path), checkpoint)
        assert path.read_text() == dump_checkpoint(checkpoint)
        assert_same_model(load_checkpoint(str(path)).model, checkpoint.model)

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OutputPathError):
            save_checkpoint(str(tmp_path / "missing" / "model.ckpt"), checkpoint_with())

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_checkpoint(str(tmp_path / "nothing.ckpt"))
