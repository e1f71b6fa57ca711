#include <gtest/gtest.h>

#include "helpers.hpp"
#include "suites.hpp"

using namespace cel;

TEST(Fuzz, RandomBytesNeverEscape) {
  auto r = suites::fuzz_parser(99, 100000);
  EXPECT_EQ(r.inputs, 100000);
  EXPECT_EQ(r.escaped, 0);
}

TEST(Fuzz, MutatedBundledModels) {
  std::mt19937_64 g(4);
  for (const auto& name : test::bundled_models()) {
    const std::string text = test::read_text(test::models_dir() + "/" + name + ".scm.txt");
    for (int i = 0; i < 300; ++i) {
      std::string s = text;
      const int edits = 1 + static_cast<int>(g() % 4);
      for (int k = 0; k < edits && !s.empty(); ++k) {
        const std::size_t at = g() % s.size();
        switch (g() % 3) {
          case 0: s[at] = static_cast<char>(g() & 0xff); break;
          case 1: s.erase(at, 1 + g() % 8); break;
          default: s.insert(at, 1, static_cast<char>(g() & 0x7f));
        }
      }
      EXPECT_NO_THROW({
        auto res = parse_model(s);
        if (res.model) (void)serialize_model(*res.model);
        else EXPECT_TRUE(has_errors(res.diagnostics));
      }) << name;
    }
  }
}
