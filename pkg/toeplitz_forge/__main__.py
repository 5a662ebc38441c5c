"""
Allow running toeplitz_forge as a module: python -m toeplitz_forge
"""
from .cli import main

if __name__ == "__main__":
    main()
