#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "uicws/config.hpp"

using namespace uicws;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return load_config(in);
}

std::string dump(const RunConfig& c) {
  std::ostringstream out;
  save_config(out, c);
  return out.str();
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig c;
  EXPECT_EQ(parse(dump(c)), c);
}

TEST(Config, NonDefaultValuesRoundTripLosslessly) {
  RunConfig c;
  c.paths.train = "data/train.conll";
  c.paths.lexicon = "lex.txt";
  c.paths.output_dir = "out dir";
  c.bio_input = true;
  c.encoder.d_e = c.encoder.d_p = c.encoder.d_w = 50;
  c.encoder.n_filters = 17;
  c.encoder.dropout = 0.1 + 0.2;  // not exactly representable in short decimal
  c.train.lr = 3e-4;
  c.train.adam_eps = 1.0 / 3.0;
  c.train.seeds = {11, 0, 18446744073709551615ULL};
  c.train.split_seed = 42;
  c.train.redraw_split = true;
  c.train.ablation = Ablation::PSA;
  c.train.precision = Precision::Double;
  c.train.jobs = 3;
  const auto back = parse(dump(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(dump(back), dump(c));
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto c = parse("[train]\nmax_epochs = 7\n; a comment\n[encoder]\ndropout = 0\n");
  EXPECT_EQ(c.train.max_epochs, 7u);
  EXPECT_EQ(c.encoder.dropout, 0.0);
  EXPECT_EQ(c.train.patience, TrainConfig{}.patience);
  EXPECT_EQ(c.encoder.d_e, EncoderConfig{}.d_e);
}

TEST(Config, UnknownKeysAndSectionsAreErrors) {
  EXPECT_THROW(parse("[train]\nlearning_rate = 0.1\n"), ConfigError);
  EXPECT_THROW(parse("[model]\nd_e = 3\n"), ConfigError);
}

TEST(Config, BadValuesAreErrors) {
  EXPECT_THROW(parse("[train]\nmax_epochs = -3\n"), ConfigError);
  EXPECT_THROW(parse("[train]\nlr = fast\n"), ConfigError);
  EXPECT_THROW(parse("[train]\nablation = everything\n"), ConfigError);
  EXPECT_THROW(parse("[train]\nredraw_split = maybe\n"), ConfigError);
  EXPECT_THROW(parse("[train]\nseeds = 1 x\n"), ConfigError);
  EXPECT_THROW(parse("[train\n"), ConfigError);
}

TEST(Config, ValidateChecksDimensionsAndTraining) {
  auto c = parse("[encoder]\nd_p = 3\n");
  EXPECT_THROW(c.validate(), ConfigError);
  c = parse("[train]\npatience = 200\n");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, PathValidationNamesTheMissingFile) {
  const auto dir = std::filesystem::temp_directory_path() / "uicws_config_test";
  std::filesystem::create_directories(dir);
  const auto train = (dir / "train.conll").string();
  std::ofstream(train) << "a\tO\n";
  RunConfig c;
  c.paths.train = train;
  try {
    c.validate_paths();
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("lexicon"), std::string::npos);
  }
  c.paths.lexicon = (dir / "missing.txt").string();
  try {
    c.validate_paths();
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(c.paths.lexicon), std::string::npos);
  }
  c.paths.lexicon = train;
  EXPECT_NO_THROW(c.validate_paths());
}

TEST(Config, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "uicws_config_roundtrip.ini").string();
  RunConfig c;
  c.train.seeds = {4, 5};
  save_config(path, c);
  EXPECT_EQ(load_config(path), c);
  EXPECT_THROW(load_config(std::string("/nonexistent/run.ini")), DataError);
}
