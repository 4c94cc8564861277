// Copyright 2026-present the tqa project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tqa/core.h"

namespace tqa::cli {

/// Runs one command line (without the program name). Returns the exit status.
int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string
version();

/// Flags are passed as `--name value`; a value of "" passes a bare flag.
struct Stage {
    std::string subcommand;
    std::vector<std::pair<std::string, std::string>> flags;
};

struct PipelineRecipe {
    std::string name;
    std::vector<Stage> stages;
};

/// File inputs a recipe draws on. Empty paths are simply not offered.
struct RecipeInputs {
    std::filesystem::path workdir;
    std::filesystem::path tables;
    std::filesystem::path dev_tables;
    std::filesystem::path train_questions;
    std::filesystem::path dev_questions;
    std::filesystem::path test_questions;
};

const std::vector<std::string>&
recipe_names();

/// Builds a named recipe. `overrides` (config flags and --config) are passed
/// to every stage; stage-specific settings take precedence over them.
PipelineRecipe
make_recipe(const std::string& name, const RecipeInputs& in, const Config& cfg,
            const std::map<std::string, std::string>& overrides);

/// Flags of a subcommand that name files it reads and files it writes.
struct StageFiles {
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

StageFiles
stage_files(const Stage& s);

/// Throws Error naming the first stage input that neither exists on disk
/// nor is produced by an earlier stage.
void
check_recipe_inputs(const PipelineRecipe& r);

/// Runs stages in order and appends one manifest line per stage to
/// `manifest`. Returns the first nonzero stage status, or 0.
int
run_recipe(const PipelineRecipe& r, const std::filesystem::path& manifest, std::ostream& out, std::ostream& err);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// The built-in invariant suite on seeded fixtures. Scratch files go to `scratch`.
std::vector<CheckResult>
selfcheck(uint64_t seed, const std::filesystem::path& scratch);

}  // namespace tqa::cli
