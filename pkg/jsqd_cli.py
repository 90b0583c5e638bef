#!/usr/bin/env python3
"""
jsqd - JSQ(d) load balancing: simulation, fluid limits and moderate-deviation rates.

Usage:
    python jsqd_cli.py stationary --lambda 0.5 --d 2 --buffer 1
    python jsqd_cli.py converge-k --family A --kmax 10 --out converge.csv
    python jsqd_cli.py mdp --gamma 0.3 --n-list 500,2000,8000 --replicas 1000 --format json
"""
import sys

from jsqd.cli import main

VERSION = "1.0.0"

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:], VERSION))
