// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#include "seedline/cli/commands.hpp"

int main(int argc, char** argv) { return seedline::cli::run(argc, argv); }
