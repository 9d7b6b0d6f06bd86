"""
Tests for the error hierarchy and its exit codes.
"""

import json

import numpy as np
import pytest

from errors_support import (
    ConfigError, ConvergenceError, GenerationError, IllConditionedError, InsufficientDataError, ModelFormatError,
    NetReconError, RegionSelectionError, SingularSystemError,
)


class TestExitCodes:
    @pytest.mark.parametrize('error_type', [ConfigError, ModelFormatError, InsufficientDataError])
    def test_validation_errors(self, error_type):
        assert error_type("bad input").exit_code == 2

    @pytest.mark.parametrize('error_type', [SingularSystemError, GenerationError, ConvergenceError,
                                            RegionSelectionError, IllConditionedError])
    def test_numerical_errors(self, error_type):
        assert error_type("failed").exit_code == 3

    def test_base_error(self):
        assert NetReconError("x").exit_code == 1


class TestPayload:
    def test_details_become_json(self):
        error = IllConditionedError("I - H(w) is singular", omega=np.float64(0.5), condition=float('inf'),
                                    nodes=np.array([1, 2]))
        payload = error.to_dict()
        json.dumps(payload)
        assert payload['error'] == 'IllConditionedError'
        assert payload['details']['condition'] == 'inf'
        assert payload['details']['nodes'] == [1, 2]

    def test_region_selection_keeps_partial_results(self):
        error = RegionSelectionError("need three zero regions", regions=[{'t_start': 0.1}], partial='report')
        assert error.partial == 'report'
        assert error.to_dict()['details']['regions'] == [{'t_start': 0.1}]

    def test_message_is_the_string_form(self):
        assert str(ConfigError("unknown configuration keys", keys=['a'])) == "unknown configuration keys"
