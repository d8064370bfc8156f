#!/usr/bin/env python3
"""
Script to generate plots from benchmark or metric report results.
Usage: python plot.py <path_to_csv_file>
"""

import argparse
import sys
from pathlib import Path

from fpa_forge.plots import plot_results


def main():
    parser = argparse.ArgumentParser(description="Generate SVG plots from a results CSV")
    parser.add_argument("csv_path", type=str, help="Path to the CSV file with results")
    args = parser.parse_args()

    if not Path(args.csv_path).exists():
        print(f"Error: File {args.csv_path} not found")
        sys.exit(1)

    print(f"Loading data from {args.csv_path}...")
    created = plot_results(args.csv_path)
    print(f"\nAll {len(created)} plots saved in: {Path(args.csv_path).parent / 'graphs'}")


if __name__ == "__main__":
    main()
