"""Entry point for running cat_aqec as a module: python -m cat_aqec"""

from cat_aqec.cli import main

main()
