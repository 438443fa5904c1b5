#pragma once

// Entry point shared by the sewkit binary and the tests.
// Exit codes: 0 ok, 1 failure, 2 validation error, 64 unknown subcommand.
int sewkit_main(int argc, const char* const* argv);
