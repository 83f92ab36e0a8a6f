"""Core lab package: settings, errors, events and the subcommand runner."""
