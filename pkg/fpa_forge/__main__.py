from fpa_forge.cli import main

main()
