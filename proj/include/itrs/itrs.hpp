// Copyright 2026 The itrs Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Umbrella header.

#ifndef ITRS_ITRS_HPP_
#define ITRS_ITRS_HPP_

#include "itrs/analysis.hpp"
#include "itrs/core.hpp"
#include "itrs/format.hpp"
#include "itrs/io.hpp"
#include "itrs/objectives.hpp"
#include "itrs/optimizer.hpp"
#include "itrs/random.hpp"
#include "itrs/schedule.hpp"

#endif  // ITRS_ITRS_HPP_
