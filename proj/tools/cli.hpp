#pragma once

// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 remote
// failure (including oracle runs that recorded skipped triplets).
int run_cli(int argc, const char* const* argv);
