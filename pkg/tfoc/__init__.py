from flask import Flask
from config import Config


def create_app(config_class=Config):
    app = Flask(__name__)
    app.config.from_object(config_class)

    # Setup logging
    from tfoc.core.logging_config import setup_logging
    setup_logging(app, level=app.config.get('LOG_LEVEL'))

    # Register error handlers
    from tfoc.core.errors import register_error_handlers
    register_error_handlers(app)

    # Register blueprints
    from tfoc.api.tools_routes import tools_bp

    app.register_blueprint(tools_bp, url_prefix='/api/tools')

    @app.route('/health')
    def health_check():
        return {"status": "healthy", "service": "tfoc"}

    @app.route('/')
    def index():
        return {
            "service": "tfoc",
            "version": app.config.get('APP_VERSION'),
            "description": "Time-frequency operator calculus on periodic grids",
            "endpoints": {
                "tools": "/api/tools",
                "norm": "/api/tools/norm",
                "schatten": "/api/tools/schatten",
                "run": "/api/tools/run"
            }
        }

    app.logger.info("tfoc service initialized successfully")
    return app
