"""
Error handling for tfoc
"""

from flask import jsonify, request
from werkzeug.exceptions import HTTPException
import logging
import traceback

logger = logging.getLogger(__name__)


class TFOCError(Exception):
    """Base error class."""
    status_code = 500
    exit_code = 1
    message = "Internal error"

    def __init__(self, message=None, status_code=None):
        super().__init__(message or self.message)
        if message:
            self.message = message
        if status_code:
            self.status_code = status_code


class ConfigurationError(TFOCError):
    """Invalid grid sizes, malformed configuration or unknown descriptors."""
    status_code = 400
    exit_code = 2
    message = "Configuration error"


class ValidationError(TFOCError):
    """Shape, grid or arity mismatch and other rejected inputs."""
    status_code = 400
    exit_code = 2
    message = "Validation error"


class HypothesisError(TFOCError):
    """A theorem hypothesis (Hessian or weight condition) failed."""
    status_code = 422
    exit_code = 1
    message = "Hypothesis check failed"


class ExperimentError(TFOCError):
    """An experiment could not be completed."""
    status_code = 500
    exit_code = 1
    message = "Experiment failed"


def register_error_handlers(app):
    """Register error handlers with the Flask app."""

    @app.errorhandler(TFOCError)
    def handle_tfoc_error(error):
        """Handle library errors."""
        response = {
            "error": {
                "message": error.message,
                "status_code": error.status_code,
                "type": error.__class__.__name__
            }
        }

        if app.debug:
            response["error"]["traceback"] = traceback.format_exc()

        logger.error(f"{error.__class__.__name__}: {error.message}", extra={
            "status_code": error.status_code,
            "path": request.path,
            "method": request.method
        })

        return jsonify(response), error.status_code

    @app.errorhandler(HTTPException)
    def handle_http_error(error):
        """Handle werkzeug HTTP errors (404, 405, malformed JSON...)."""
        return jsonify({
            "error": {
                "message": error.description or error.name,
                "status_code": error.code,
                "type": error.name.replace(" ", "")
            }
        }), error.code

    @app.errorhandler(Exception)
    def handle_unexpected_error(error):
        """Handle unexpected errors."""
        response = {
            "error": {
                "message": "An unexpected error occurred",
                "status_code": 500,
                "type": "UnexpectedError"
            }
        }

        if app.debug:
            response["error"]["traceback"] = traceback.format_exc()
            response["error"]["details"] = str(error)

        logger.error(f"Unexpected Error: {str(error)}", extra={
            "path": request.path,
            "method": request.method
        })

        return jsonify(response), 500
