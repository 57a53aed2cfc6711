// SPDX-License-Identifier: Apache-2.0
//
// cellfree: cooperative downlink beamforming for cell-free massive MIMO
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "types.hpp"
#include "scenario.hpp"
#include "estimation.hpp"
#include "rate_model.hpp"
#include "grwmmse.hpp"
#include "baselines.hpp"
#include "oracle.hpp"
#include "harness.hpp"
#include "selftest.hpp"
