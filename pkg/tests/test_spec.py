"""Tests for architecture parsing and network validation."""

import pytest

from devosnn.spec import (
    build_network_spec,
    conv,
    fc,
    format_architecture,
    parse_architecture,
    pool,
    validate_network,
    NetworkSpec,
)

MNIST_ARCH = "Input-15C3-AvgPool2-40C3-AvgPool2-Flatten-300FC-10FC"


class TestParseArchitecture:
    def test_mnist_layers(self):
        layers = parse_architecture(MNIST_ARCH)
        assert [l.kind for l in layers] == ["conv", "avgpool", "conv", "avgpool", "fc", "fc"]
        assert layers[0].out_channels == 15
        assert layers[0].kernel_size == 3
        assert layers[0].padding == 1
        assert layers[1].window == 2 and layers[1].stride == 2
        assert layers[-1].out_units == 10

    def test_maxpool_token(self):
        layers = parse_architecture("Input-8C3-MaxPool2-4FC")
        assert layers[1].kind == "maxpool"

    def test_round_trip_through_format(self):
        assert format_architecture(parse_architecture(MNIST_ARCH)) == MNIST_ARCH

    def test_fc_only_has_no_flatten_marker(self):
        assert format_architecture(parse_architecture("Input-Flatten-800FC-10FC")) == "Input-800FC-10FC"

    def test_bad_tokens_all_reported(self):
        with pytest.raises(ValueError, match="Architecture parse failed") as exc:
            parse_architecture("Input-15X3-AvgPool2-abc-10FC")
        assert "'15X3'" in str(exc.value)
        assert "'abc'" in str(exc.value)


class TestShapes:
    def test_mnist_shapes(self):
        spec = build_network_spec(MNIST_ARCH, (1, 28, 28))
        assert spec.output_shapes() == [(15, 28, 28), (15, 14, 14), (40, 14, 14), (40, 7, 7), (300,), (10,)]
        assert spec.weight_shapes() == [(15, 1, 3, 3), (40, 15, 3, 3), (300, 40 * 7 * 7), (10, 300)]
        assert spec.kinds == ["conv", "conv", "fc", "fc"]
        assert spec.class_count == 10

    def test_weighted_indices_skip_pools(self):
        spec = build_network_spec(MNIST_ARCH, (1, 28, 28))
        assert spec.weighted_indices == [0, 2, 4, 5]

    def test_input_shapes_shift_by_one(self):
        spec = build_network_spec("Input-4C3-AvgPool2-3FC", (2, 8, 8))
        assert spec.input_shapes() == [(2, 8, 8), (4, 8, 8), (4, 4, 4)]


class TestValidateNetwork:
    def _spec(self, layers, **kw):
        return NetworkSpec(layers=layers, input_shape=kw.pop("input_shape", (1, 8, 8)), **kw)

    def test_valid(self):
        validate_network(self._spec([conv(4, 3), pool("avgpool", 2), fc(3)]))

    def test_readout_must_be_fc(self):
        with pytest.raises(ValueError, match="final layer must be fc"):
            validate_network(self._spec([fc(3), conv(4, 3)]))

    def test_pool_must_follow_conv(self):
        with pytest.raises(ValueError, match="must follow a spiking conv layer"):
            validate_network(self._spec([pool("avgpool", 2), conv(4, 3), fc(3)]))

    def test_conv_after_fc(self):
        with pytest.raises(ValueError, match="conv layer after fc"):
            validate_network(self._spec([fc(5), conv(4, 3), fc(3)]))

    def test_neuron_parameters_collected(self):
        with pytest.raises(ValueError) as exc:
            validate_network(self._spec([fc(3)], time_steps=0, tau=1.0, a=0.0, v_th=-1.0))
        message = str(exc.value)
        for fragment in ("time_steps", "tau", "a must be", "v_th"):
            assert fragment in message

    def test_collapsed_shape(self):
        with pytest.raises(ValueError, match="is empty"):
            validate_network(self._spec([conv(4, 3), pool("avgpool", 16), fc(3)]))
