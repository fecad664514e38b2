/*
 * Copyright (C) 2026 The srmc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SRMC_SRMC_HPP
#define SRMC_SRMC_HPP

#include "srmc/adam.hpp"
#include "srmc/checkpoint.hpp"
#include "srmc/conv.hpp"
#include "srmc/dataset.hpp"
#include "srmc/energy.hpp"
#include "srmc/generator.hpp"
#include "srmc/gradcheck.hpp"
#include "srmc/graph.hpp"
#include "srmc/grid.hpp"
#include "srmc/parallel.hpp"
#include "srmc/png.hpp"
#include "srmc/report.hpp"
#include "srmc/rng.hpp"
#include "srmc/sampler.hpp"
#include "srmc/tensor.hpp"
#include "srmc/theory.hpp"
#include "srmc/trainer.hpp"

#endif  // SRMC_SRMC_HPP
