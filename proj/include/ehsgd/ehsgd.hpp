/*
 * Copyright 2026 The ehsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EHSGD_EHSGD_HPP_
#define EHSGD_EHSGD_HPP_

#include "ehsgd/analysis.hpp"
#include "ehsgd/config.hpp"
#include "ehsgd/energy_arrivals.hpp"
#include "ehsgd/error.hpp"
#include "ehsgd/experiment.hpp"
#include "ehsgd/objective.hpp"
#include "ehsgd/random.hpp"
#include "ehsgd/scheduling.hpp"
#include "ehsgd/training.hpp"
#include "ehsgd/vector_ops.hpp"
#include "ehsgd/verifiers.hpp"

#endif  // EHSGD_EHSGD_HPP_
