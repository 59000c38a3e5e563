// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/image_io.hpp"

namespace artikin {

/// Binary silhouette of one part in one view.
struct PartMask {
    int view = 0;
    int label = 0;
    BinaryImage mask;

    friend bool operator==(const PartMask&, const PartMask&) = default;
};

} // namespace artikin
