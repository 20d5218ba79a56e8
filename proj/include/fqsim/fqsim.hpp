// Copyright 2026 The fqsim Authors
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

// Umbrella header.

#pragma once

#include "fqsim/errors.hpp"
#include "fqsim/rng.hpp"
#include "fqsim/linalg.hpp"
#include "fqsim/statevector.hpp"
#include "fqsim/resources.hpp"
#include "fqsim/oracle.hpp"
#include "fqsim/driving_config.hpp"
#include "fqsim/walk.hpp"
#include "fqsim/uncompressed.hpp"
#include "fqsim/encoding.hpp"
#include "fqsim/preparation.hpp"
#include "fqsim/cleanup.hpp"
#include "fqsim/compressed.hpp"
#include "fqsim/experiment.hpp"
