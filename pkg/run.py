#!/usr/bin/env python3
"""
tfoc - Development Server
"""

import os

from tfoc import create_app

app = create_app()

if __name__ == '__main__':
    app.run(debug=os.environ.get('FLASK_DEBUG') == '1', host='0.0.0.0', port=int(os.environ.get('PORT', 5000)))
