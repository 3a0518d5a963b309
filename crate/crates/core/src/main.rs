// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

fn main() -> std::process::ExitCode {
    arpsim::cli::main()
}
