#pragma once

namespace termharness::assets_gen {

struct AssetEntry {
    const char* name;
    const char* data;
    unsigned long size;
};

extern const AssetEntry kAssets[];
extern const unsigned long kAssetCount;

} // namespace termharness::assets_gen
