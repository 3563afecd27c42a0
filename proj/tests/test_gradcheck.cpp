// Copyright 2026 The otalign Authors.
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

#include "doctest.h"
#include "otalign/errors.hpp"
#include "otalign/gradcheck.hpp"

using namespace otalign;

TEST_CASE("every gradient suite passes at its tolerance") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    GradcheckOptions options;
    options.seed = seed;
    const auto rows = run_gradchecks(options);
    CHECK(rows.size() >= 20);
    for (const GradcheckRow& r : rows) {
      CAPTURE(r.op);
      CHECK(r.passed);
      CHECK(r.probes > 0);
    }
  }
}

TEST_CASE("module filter and corrupt hook") {
  GradcheckOptions options;
  options.module = "seqdist";
  const auto rows = run_gradchecks(options);
  for (const GradcheckRow& r : rows) CHECK(r.module == "seqdist");

  // Filtering does not change a suite's draws.
  GradcheckOptions all;
  for (const GradcheckRow& r : run_gradchecks(all))
    if (r.module == "seqdist")
      for (const GradcheckRow& f : rows)
        if (f.op == r.op) CHECK(f.max_rel_error == r.max_rel_error);

  options.corrupt = true;
  for (const GradcheckRow& r : run_gradchecks(options)) CHECK_FALSE(r.passed);

  options.module = "bogus";
  CHECK_THROWS_AS(run_gradchecks(options), InputError);
}
