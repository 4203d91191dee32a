# Filename    : errors.py
# Description : Error hierarchy shared by the library and the command line

class StarcertError(Exception):
    """Base error. `error` is a stable code, `message` is for humans."""

    error = 'error'
    exit_code = 1

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self):
        payload = {
            'success': False,
            'error': self.error,
            'message': self.message
        }
        if self.context:
            payload['context'] = {k: str(v) for k, v in self.context.items()}
        return payload


# ===== Input / loader errors =====

class MissingFileError(StarcertError):
    error = 'missing_file'
    exit_code = 2


class MalformedJSONError(StarcertError):
    error = 'malformed_json'
    exit_code = 3


class SizeMismatchError(StarcertError):
    error = 'size_mismatch'
    exit_code = 4


class UnsupportedVersionError(StarcertError):
    error = 'unsupported_version'
    exit_code = 5


class InvalidManifestError(StarcertError):
    error = 'invalid_manifest'
    exit_code = 6


class InvalidSampleError(StarcertError):
    error = 'invalid_sample'
    exit_code = 7


class ValidationError(StarcertError):
    error = 'validation_error'
    exit_code = 8


# ===== Geometry / computation errors =====

class DimensionMismatchError(StarcertError):
    error = 'dimension_mismatch'
    exit_code = 9


class EmptyOperandsError(StarcertError):
    error = 'empty_operands'
    exit_code = 10


class CenterMismatchError(StarcertError):
    error = 'center_mismatch'
    exit_code = 11


class PointOutsideError(StarcertError):
    error = 'point_outside'
    exit_code = 12


class EmptyClusterError(StarcertError):
    error = 'empty_cluster'
    exit_code = 13


class EmptyBinsError(StarcertError):
    error = 'empty_bins'
    exit_code = 14


class UndefinedCorrelationError(StarcertError):
    error = 'undefined_correlation'
    exit_code = 15


class SceneTooCrowdedError(StarcertError):
    error = 'scene_too_crowded'
    exit_code = 16


class CenterOutOfBoundsError(StarcertError):
    error = 'center_out_of_bounds'
    exit_code = 17


# ===== Command line errors =====

class MethodMismatchError(StarcertError):
    error = 'method_mismatch'
    exit_code = 18


class MissingGroundTruthError(StarcertError):
    error = 'missing_ground_truth'
    exit_code = 19


class InvalidFlagError(StarcertError):
    error = 'invalid_flag'
    exit_code = 20
