#ifndef XATTN_CONFIG_HPP
#define XATTN_CONFIG_HPP

#include <string>

#include "xattn/pipeline.hpp"

namespace xattn::io {

/// Flat key = value text, '#' comments. Unknown keys are rejected so typos
/// cannot silently fall back to defaults. Keys:
///   num_steps, window32_lo, window32_hi, window64_lo, window64_hi,
///   contrast_beta, guidance_alpha, adain_lo, adain_hi,
///   structure_injection_period, domain_prompt, seed, use_masks,
///   mask_strategy (none|file|attention), eta
pipeline::TransferConfig parse_config_text(const std::string& text,
                                           pipeline::MaskStrategy* strategy = nullptr);

pipeline::TransferConfig load_config_file(const std::string& path,
                                          pipeline::MaskStrategy* strategy = nullptr);

/// Full-default echo of a resolved config, parseable by parse_config_text.
std::string config_to_text(const pipeline::TransferConfig& config,
                           pipeline::MaskStrategy strategy);

std::string to_string(pipeline::MaskStrategy strategy);

} // namespace xattn::io

#endif // XATTN_CONFIG_HPP
